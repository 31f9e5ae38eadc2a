#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "rsim/csv.hpp"

namespace rsim {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Wrap an angle into [0, 2*pi).
inline double wrap_angle(double rad) {
    double w = std::fmod(rad, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

struct TrajectoryPoint {
    double t = 0.0;        // s
    double x = 0.0;        // m
    double y = 0.0;        // m
    double v = 0.0;        // speed magnitude, m/s, >= 0
    double a = 0.0;        // signed longitudinal acceleration, m/s^2
    double heading = 0.0;  // rad, [0, 2*pi)
};

/// Time-ordered kinematic samples of one vehicle at a fixed rate.
struct Trajectory {
    std::string vehicle_id;
    std::vector<TrajectoryPoint> points;
    double dt = 0.1;  // nominal sample interval, s
};

/// Checks ordering, spacing, and sign invariants; throws DataError.
inline void validate_trajectory(const Trajectory& traj) {
    const auto& pts = traj.points;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        if (pts[k].v < 0.0)
            throw DataError("trajectory '" + traj.vehicle_id + "': negative speed at sample " + std::to_string(k));
        if (k == 0) continue;
        const double step = pts[k].t - pts[k - 1].t;
        if (step <= 0.0)
            throw DataError("trajectory '" + traj.vehicle_id + "': non-increasing time at sample " +
                            std::to_string(k));
        if (std::fabs(step - traj.dt) > 1e-6)
            throw DataError("trajectory '" + traj.vehicle_id + "': sample interval " + format_double(step) +
                            " at sample " + std::to_string(k) + " deviates from dt = " + format_double(traj.dt));
    }
}

/// Reads `t,x,y,v,a,heading` rows; dt is inferred from the first two rows.
inline Trajectory ingest_trajectory_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    csv::require_columns(table, {"t", "x", "y", "v", "a", "heading"}, "trajectory CSV");
    Trajectory traj;
    traj.vehicle_id = path;
    traj.points.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::size_t lineno = table.line_numbers[i];
        if (row.size() != 6)
            throw ParseError("line " + std::to_string(lineno) + ": expected 6 fields, got " +
                             std::to_string(row.size()));
        TrajectoryPoint p;
        p.t = csv::parse_double(row[0], lineno, "t");
        p.x = csv::parse_double(row[1], lineno, "x");
        p.y = csv::parse_double(row[2], lineno, "y");
        p.v = csv::parse_double(row[3], lineno, "v");
        p.a = csv::parse_double(row[4], lineno, "a");
        p.heading = wrap_angle(csv::parse_double(row[5], lineno, "heading"));
        if (p.v < 0.0) throw DataError("line " + std::to_string(lineno) + ": negative speed");
        if (!traj.points.empty() && p.t <= traj.points.back().t)
            throw DataError("line " + std::to_string(lineno) + ": timestamps must strictly increase");
        traj.points.push_back(p);
    }
    if (traj.points.empty()) throw EmptyInputError("'" + path + "' has no data rows");
    if (traj.points.size() >= 2) traj.dt = traj.points[1].t - traj.points[0].t;
    validate_trajectory(traj);
    return traj;
}

inline std::string trajectory_to_csv(const Trajectory& traj) {
    std::ostringstream out;
    out << "t,x,y,v,a,heading\n";
    for (const auto& p : traj.points) {
        out << format_double(p.t) << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
            << format_double(p.v) << ',' << format_double(p.a) << ',' << format_double(p.heading) << '\n';
    }
    return out.str();
}

struct KalmanConfig {
    double process_noise_std = 1.0;          // white-noise acceleration, m/s^2
    double measurement_noise_std_pos = 0.5;  // m
    double measurement_noise_std_vel = 0.3;  // m/s
    double initial_covariance_scale = 10.0;

    void validate() const {
        if (!(process_noise_std > 0.0) || !(measurement_noise_std_pos > 0.0) ||
            !(measurement_noise_std_vel > 0.0) || !(initial_covariance_scale > 0.0))
            throw DataError("kalman config: all parameters must be > 0");
    }
};

/// Offline fixed-interval smoothing (forward Kalman filter, then a
/// Rauch-Tung-Striebel backward pass) under a 2D constant-velocity model with
/// white-noise acceleration.
///
/// State per axis is (position, velocity); measurements are the sample
/// position and the speed decomposed through the recorded heading. Output
/// keeps the input timestamps, recomputes v and heading from the smoothed
/// velocity, and rebuilds a by central differencing of the smoothed speed.
inline Trajectory kalman_smooth(const Trajectory& traj, const KalmanConfig& cfg = {}) {
    cfg.validate();
    const std::size_t n = traj.points.size();
    if (n < 2) throw DataError("kalman_smooth: need at least 2 points, got " + std::to_string(n));

    using Eigen::Matrix4d;
    using Eigen::Vector4d;

    // state: [px, vx, py, vy]
    const double rp = cfg.measurement_noise_std_pos * cfg.measurement_noise_std_pos;
    const double rv = cfg.measurement_noise_std_vel * cfg.measurement_noise_std_vel;
    const Matrix4d R = Vector4d(rp, rv, rp, rv).asDiagonal();
    const double q2 = cfg.process_noise_std * cfg.process_noise_std;

    auto transition = [](double dt) {
        Matrix4d F = Matrix4d::Identity();
        F(0, 1) = dt;
        F(2, 3) = dt;
        return F;
    };
    auto process_noise = [q2](double dt) {
        const double d2 = dt * dt, d3 = d2 * dt, d4 = d3 * dt;
        Matrix4d Q = Matrix4d::Zero();
        for (int axis = 0; axis < 2; ++axis) {
            const int i = 2 * axis;
            Q(i, i) = q2 * d4 / 4.0;
            Q(i, i + 1) = Q(i + 1, i) = q2 * d3 / 2.0;
            Q(i + 1, i + 1) = q2 * d2;
        }
        return Q;
    };
    auto measurement = [](const TrajectoryPoint& p) {
        return Vector4d(p.x, p.v * std::cos(p.heading), p.y, p.v * std::sin(p.heading));
    };

    std::vector<Vector4d> x_pred(n), x_filt(n);
    std::vector<Matrix4d> p_pred(n), p_filt(n);

    x_filt[0] = measurement(traj.points[0]);
    p_filt[0] = cfg.initial_covariance_scale * R;
    x_pred[0] = x_filt[0];
    p_pred[0] = p_filt[0];
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = traj.points[k].t - traj.points[k - 1].t;
        const Matrix4d F = transition(dt);
        x_pred[k] = F * x_filt[k - 1];
        p_pred[k] = F * p_filt[k - 1] * F.transpose() + process_noise(dt);
        const Matrix4d S = p_pred[k] + R;  // H = I
        const Matrix4d K = S.ldlt().solve(p_pred[k]).transpose();
        x_filt[k] = x_pred[k] + K * (measurement(traj.points[k]) - x_pred[k]);
        p_filt[k] = (Matrix4d::Identity() - K) * p_pred[k];
    }

    std::vector<Vector4d> x_smooth(n);
    x_smooth[n - 1] = x_filt[n - 1];
    Matrix4d p_next = p_filt[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) {
        const double dt = traj.points[k + 1].t - traj.points[k].t;
        const Matrix4d F = transition(dt);
        const Matrix4d C = p_pred[k + 1].ldlt().solve(F * p_filt[k]).transpose();
        x_smooth[k] = x_filt[k] + C * (x_smooth[k + 1] - x_pred[k + 1]);
        p_next = p_filt[k] + C * (p_next - p_pred[k + 1]) * C.transpose();
    }

    Trajectory out;
    out.vehicle_id = traj.vehicle_id;
    out.dt = traj.dt;
    out.points.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        TrajectoryPoint& p = out.points[k];
        p.t = traj.points[k].t;
        p.x = x_smooth[k](0);
        p.y = x_smooth[k](2);
        const double vx = x_smooth[k](1);
        const double vy = x_smooth[k](3);
        p.v = std::hypot(vx, vy);
        p.heading = (vx == 0.0 && vy == 0.0) ? traj.points[k].heading : wrap_angle(std::atan2(vy, vx));
    }
    for (std::size_t k = 0; k < n; ++k) {
        TrajectoryPoint& p = out.points[k];
        if (k == 0)
            p.a = (out.points[1].v - out.points[0].v) / (out.points[1].t - out.points[0].t);
        else if (k + 1 == n)
            p.a = (out.points[k].v - out.points[k - 1].v) / (out.points[k].t - out.points[k - 1].t);
        else
            p.a = (out.points[k + 1].v - out.points[k - 1].v) / (out.points[k + 1].t - out.points[k - 1].t);
    }
    return out;
}

}  // namespace rsim
