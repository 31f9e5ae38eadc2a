#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsim/distributions.hpp"
#include "rsim/trajectory.hpp"

namespace rsim::ssm {

/// Physical footprint and braking-capability model of one vehicle. The
/// maximum available deceleration rate (MADR) is a truncated normal: braking
/// ability varies across the fleet but stays within physical bounds.
struct VehicleSpec {
    double radius = 2.0;      // m
    double madr_mean = 8.45;  // m/s^2 (magnitude)
    double madr_std = 1.40;
    double madr_lower = 4.23;
    double madr_upper = 12.68;

    void validate() const {
        if (!(radius > 0.0)) throw DataError("vehicle spec: radius must be > 0");
        if (!(madr_std > 0.0)) throw DataError("vehicle spec: madr_std must be > 0");
        if (!(madr_lower < madr_mean && madr_mean < madr_upper))
            throw DataError("vehicle spec: need madr_lower < madr_mean < madr_upper");
    }

    TruncatedNormal madr() const {
        validate();
        return TruncatedNormal{madr_mean, madr_std, madr_lower, madr_upper};
    }
};

/// Where the two paths cross, plus each vehicle's along-path distance to that
/// point per trajectory sample (negative once the vehicle has passed it).
struct ConflictGeometry {
    double conflict_x = 0.0;
    double conflict_y = 0.0;
    std::vector<double> dist_to_conflict_i;  // aligned to trajectory i samples
    std::vector<double> dist_to_conflict_j;  // aligned to trajectory j samples
};

struct TtcSample {
    double t = 0.0;
    bool defined = false;  // false while diverging or mutually stationary
    double ttc = 0.0;      // s, valid when defined
};

struct DracSample {
    double t = 0.0;
    double drac = 0.0;  // m/s^2, >= 0
};

struct AccelSample {
    double t = 0.0;
    double a = 0.0;  // m/s^2
};

/// Time to collision from a net gap (already reduced by both radii) and the
/// two closing speeds. Undefined (nullopt) when the combined closing speed is
/// zero.
inline std::optional<double> ttc(double net_distance, double closing_speed_i, double closing_speed_j) {
    if (net_distance < 0.0) throw DataError("ttc: net distance must be >= 0");
    if (closing_speed_i < 0.0 || closing_speed_j < 0.0)
        throw DataError("ttc: closing speeds must be >= 0");
    const double closing = closing_speed_i + closing_speed_j;
    if (closing == 0.0) return std::nullopt;
    return net_distance / closing;
}

/// Signed time headway at a shared conflict point: D_j/V_j - D_i/V_i,
/// positive when vehicle i arrives first. Undefined if either speed is zero.
inline std::optional<double> time_headway(double D_i, double V_i, double D_j, double V_j) {
    if (V_i <= 0.0 || V_j <= 0.0) return std::nullopt;
    return D_j / V_j - D_i / V_i;
}

/// Deceleration required of the faster vehicle to avoid a crash over gap d:
/// (V_i - V_j)^2 / (2d), and 0 when there is no closing (V_i <= V_j).
inline double drac(double V_i, double V_j, double d) {
    if (!(d > 0.0)) throw DataError("drac: distance must be > 0");
    if (V_i <= V_j) return 0.0;
    const double dv = V_i - V_j;
    return dv * dv / (2.0 * d);
}

/// P(DRAC exceeds the vehicle's available deceleration) = truncated-normal
/// CDF of the MADR distribution at drac_value.
inline double madr_exceedance_prob(double drac_value, const VehicleSpec& spec) {
    if (!(drac_value >= 0.0)) throw DataError("madr_exceedance_prob: drac must be >= 0");
    if (std::isinf(drac_value)) return 1.0;
    return spec.madr().cdf(drac_value);
}

namespace detail {

/// Index pairs of time-aligned samples (equal timestamps within 1e-9 s).
inline std::vector<std::pair<std::size_t, std::size_t>> align(const Trajectory& a, const Trajectory& b) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t i = 0, j = 0;
    while (i < a.points.size() && j < b.points.size()) {
        const double ti = a.points[i].t;
        const double tj = b.points[j].t;
        if (std::fabs(ti - tj) <= 1e-9) {
            out.emplace_back(i, j);
            ++i;
            ++j;
        } else if (ti < tj) {
            ++i;
        } else {
            ++j;
        }
    }
    return out;
}

struct PairKinematics {
    double t;
    double net_gap;     // center distance minus both radii, >= 0 (0 = contact)
    bool contact;       // center distance <= r_i + r_j
    double closing_i;   // speed of i projected toward j, clamped at 0
    double closing_j;   // speed of j projected toward i, clamped at 0
    double closing_sum; // unclamped projection sum (negative = diverging)
};

inline PairKinematics pair_kinematics(const TrajectoryPoint& pi, const TrajectoryPoint& pj, double r_i, double r_j) {
    PairKinematics k{};
    k.t = pi.t;
    const double dx = pj.x - pi.x;
    const double dy = pj.y - pi.y;
    const double dist = std::hypot(dx, dy);
    k.contact = dist <= r_i + r_j;
    k.net_gap = std::max(dist - r_i - r_j, 0.0);
    if (dist <= 0.0) {
        k.closing_i = k.closing_j = k.closing_sum = 0.0;
        return k;
    }
    const double ux = dx / dist;
    const double uy = dy / dist;
    const double ci = pi.v * (std::cos(pi.heading) * ux + std::sin(pi.heading) * uy);
    const double cj = pj.v * (std::cos(pj.heading) * -ux + std::sin(pj.heading) * -uy);
    k.closing_sum = ci + cj;
    k.closing_i = std::max(ci, 0.0);
    k.closing_j = std::max(cj, 0.0);
    return k;
}

}  // namespace detail

/// Per-sample TTC of two time-aligned trajectories. Closing speeds are the
/// projections of each velocity onto the line of sight toward the other
/// vehicle; samples with a non-positive projected sum are emitted undefined.
inline std::vector<TtcSample> ttc_series(const Trajectory& traj_i, const Trajectory& traj_j,
                                         const VehicleSpec& spec_i, const VehicleSpec& spec_j) {
    spec_i.validate();
    spec_j.validate();
    const auto aligned = detail::align(traj_i, traj_j);
    if (aligned.empty()) throw DataError("ttc_series: trajectories share no overlapping time range");
    std::vector<TtcSample> out;
    out.reserve(aligned.size());
    for (const auto& [i, j] : aligned) {
        const auto k = detail::pair_kinematics(traj_i.points[i], traj_j.points[j], spec_i.radius, spec_j.radius);
        TtcSample s;
        s.t = k.t;
        if (k.contact) {
            s.defined = true;
            s.ttc = 0.0;
        } else if (k.closing_sum > 0.0) {
            s.defined = true;
            s.ttc = k.net_gap / k.closing_sum;
        }
        out.push_back(s);
    }
    return out;
}

/// Crash potential index over the exposure window [t_e, t_f]:
/// sum of P(DRAC_t > MADR) * dt * b_t / T_i with b_t = 1 iff DRAC_t > 0 and
/// T_i the summed sample time n*dt, so CPI lands in [0, 1] exactly.
inline double cpi(const std::vector<DracSample>& drac_series, const VehicleSpec& spec, double t_e, double t_f,
                  double dt) {
    if (!(t_e < t_f)) throw DataError("cpi: window start must precede end");
    if (!(dt > 0.0)) throw DataError("cpi: dt must be > 0");
    spec.validate();
    std::size_t n = 0;
    double acc = 0.0;
    for (const auto& s : drac_series) {
        if (s.t < t_e - 1e-9 || s.t > t_f + 1e-9) continue;
        ++n;
        if (s.drac > 0.0) acc += madr_exceedance_prob(s.drac, spec) * dt;
    }
    if (n == 0) throw DataError("cpi: no samples inside the window");
    return acc / (static_cast<double>(n) * dt);
}

/// Acceleration noise over [t_e, t_f]: time-weighted RMS deviation from the
/// window-mean acceleration, sqrt(sum (a - abar)^2 * dt / T_i) with T_i = n*dt.
inline double acceleration_noise(const std::vector<AccelSample>& accels, double t_e, double t_f, double dt) {
    if (!(t_e < t_f)) throw DataError("acceleration_noise: window start must precede end");
    if (!(dt > 0.0)) throw DataError("acceleration_noise: dt must be > 0");
    std::vector<double> a;
    for (const auto& s : accels)
        if (s.t >= t_e - 1e-9 && s.t <= t_f + 1e-9) a.push_back(s.a);
    if (a.size() < 2)
        throw DataError("acceleration_noise: window holds " + std::to_string(a.size()) + " samples, need >= 2");
    // constant window: zero deviation exactly, independent of mean rounding
    if (*std::max_element(a.begin(), a.end()) == *std::min_element(a.begin(), a.end())) return 0.0;
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(a.size());
    double acc = 0.0;
    for (double v : a) acc += (v - mean) * (v - mean) * dt;
    return std::sqrt(acc / (static_cast<double>(a.size()) * dt));
}

struct BrakingStats {
    bool braking = false;    // false: no sample with a < 0 in the window
    double avg_decel = 0.0;  // m/s^2, <= 0
    double max_decel = 0.0;  // most negative a, m/s^2
    double duration = 0.0;   // total time spent with a < 0, s
    double window_start = 0.0;
    double window_end = 0.0;
};

/// Deceleration statistics in the +-2 s window around the collision-point
/// time (right edge clamped to the trajectory end): mean and extreme of the
/// negative accelerations plus the total braking time.
inline BrakingStats braking_stats(const Trajectory& traj, double t_collision_point) {
    if (traj.points.empty()) throw DataError("braking_stats: empty trajectory");
    BrakingStats out;
    out.window_start = t_collision_point - 2.0;
    out.window_end = std::min(t_collision_point + 2.0, traj.points.back().t);
    double sum = 0.0;
    std::size_t count = 0;
    double most_negative = 0.0;
    for (const auto& p : traj.points) {
        if (p.t < out.window_start - 1e-9 || p.t > out.window_end + 1e-9) continue;
        if (p.a < 0.0) {
            sum += p.a;
            ++count;
            most_negative = std::min(most_negative, p.a);
        }
    }
    if (count == 0) return out;
    out.braking = true;
    out.avg_decel = sum / static_cast<double>(count);
    out.max_decel = most_negative;
    out.duration = static_cast<double>(count) * traj.dt;
    return out;
}

/// Per-trial metric bundle.
struct SafetyReport {
    bool has_min_ttc = false;
    double min_ttc = 0.0;    // s
    double t_min_ttc = 0.0;  // s
    bool collision = false;  // net gap reached 0
    bool has_window = false; // exposure window [t_entry, t_min_ttc] was valid
    double cpi = 0.0;
    double max_drac = 0.0;   // m/s^2
    double an = 0.0;         // m/s^2
    bool braking = false;
    double max_decel = 0.0;  // m/s^2, <= 0
    double avg_decel = 0.0;  // m/s^2, <= 0
    double braking_window_start = 0.0;
    double braking_window_end = 0.0;
    double braking_duration = 0.0;
    double t_entry = 0.0;    // s, exposure window start (roundabout entry)
};

/// Full surrogate-safety evaluation of one vehicle pair. Vehicle i is the
/// analyzed (ego) vehicle: CPI uses its MADR model and braking stats come
/// from its acceleration trace. The exposure window runs from t_e to the
/// minimum-TTC time.
inline SafetyReport safety_report(const Trajectory& traj_i, const Trajectory& traj_j, const VehicleSpec& spec_i,
                                  const VehicleSpec& spec_j, const ConflictGeometry& geometry, double t_e) {
    if (!geometry.dist_to_conflict_i.empty() && geometry.dist_to_conflict_i.size() != traj_i.points.size())
        throw DataError("safety_report: geometry series i does not match trajectory i");
    if (!geometry.dist_to_conflict_j.empty() && geometry.dist_to_conflict_j.size() != traj_j.points.size())
        throw DataError("safety_report: geometry series j does not match trajectory j");

    SafetyReport rep;
    rep.t_entry = t_e;

    const auto aligned = detail::align(traj_i, traj_j);
    if (aligned.empty()) throw DataError("safety_report: trajectories share no overlapping time range");

    // TTC minimum, first-contact detection, and the DRAC series in one pass.
    std::vector<DracSample> dracs;
    dracs.reserve(aligned.size());
    for (const auto& [i, j] : aligned) {
        const auto k = detail::pair_kinematics(traj_i.points[i], traj_j.points[j], spec_i.radius, spec_j.radius);
        if (k.contact && !rep.collision) {
            rep.collision = true;
            rep.has_min_ttc = true;
            rep.min_ttc = 0.0;
            rep.t_min_ttc = k.t;
        }
        if (!rep.collision && k.closing_sum > 0.0) {
            const double v = k.net_gap / k.closing_sum;
            if (!rep.has_min_ttc || v < rep.min_ttc) {
                rep.has_min_ttc = true;
                rep.min_ttc = v;
                rep.t_min_ttc = k.t;
            }
        }
        DracSample d;
        d.t = k.t;
        if (k.closing_sum > 0.0) {
            // line-of-sight reduction to the two-vehicle closing problem:
            // gap shrinks at closing_sum, so the required deceleration is
            // closing_sum^2 / (2 * gap)
            d.drac = k.net_gap > 0.0 ? k.closing_sum * k.closing_sum / (2.0 * k.net_gap)
                                     : std::numeric_limits<double>::infinity();
        }
        dracs.push_back(d);
    }

    if (!rep.has_min_ttc) return rep;  // never-approaching pair: cpi stays 0

    const double t_f = rep.t_min_ttc;
    if (t_f > t_e) {
        rep.has_window = true;
        rep.cpi = cpi(dracs, spec_i, t_e, t_f, traj_i.dt);
        for (const auto& d : dracs)
            if (d.t >= t_e - 1e-9 && d.t <= t_f + 1e-9 && !std::isinf(d.drac))
                rep.max_drac = std::max(rep.max_drac, d.drac);
        std::vector<AccelSample> accels;
        accels.reserve(traj_i.points.size());
        for (const auto& p : traj_i.points) accels.push_back({p.t, p.a});
        rep.an = acceleration_noise(accels, t_e, t_f, traj_i.dt);
    }

    const BrakingStats bs = braking_stats(traj_i, t_f);
    rep.braking = bs.braking;
    rep.max_decel = bs.max_decel;
    rep.avg_decel = bs.avg_decel;
    rep.braking_window_start = bs.window_start;
    rep.braking_window_end = bs.window_end;
    rep.braking_duration = bs.duration;
    return rep;
}

inline std::string safety_report_csv_header() {
    return "has_min_ttc,min_ttc,t_min_ttc,collision,cpi,max_drac,an,braking,max_decel,avg_decel,"
           "braking_window_start,braking_window_end,braking_duration,t_entry";
}

inline std::string safety_report_csv_row(const SafetyReport& r) {
    std::ostringstream out;
    out << (r.has_min_ttc ? 1 : 0) << ',';
    if (r.has_min_ttc) out << format_double(r.min_ttc) << ',' << format_double(r.t_min_ttc) << ',';
    else out << ",,";
    out << (r.collision ? 1 : 0) << ',' << format_double(r.cpi) << ',' << format_double(r.max_drac) << ','
        << format_double(r.an) << ',' << (r.braking ? 1 : 0) << ',' << format_double(r.max_decel) << ','
        << format_double(r.avg_decel) << ',' << format_double(r.braking_window_start) << ','
        << format_double(r.braking_window_end) << ',' << format_double(r.braking_duration) << ','
        << format_double(r.t_entry);
    return out.str();
}

inline nlohmann::json safety_report_json(const SafetyReport& r) {
    nlohmann::json j;
    j["has_min_ttc"] = r.has_min_ttc;
    if (r.has_min_ttc) {
        j["min_ttc"] = r.min_ttc;
        j["t_min_ttc"] = r.t_min_ttc;
    } else {
        j["min_ttc"] = nullptr;
        j["t_min_ttc"] = nullptr;
    }
    j["collision"] = r.collision;
    j["cpi"] = r.cpi;
    j["max_drac"] = r.max_drac;
    j["an"] = r.an;
    j["braking"] = r.braking;
    j["max_decel"] = r.max_decel;
    j["avg_decel"] = r.avg_decel;
    j["braking_window"] = {r.braking_window_start, r.braking_window_end};
    j["braking_duration"] = r.braking_duration;
    j["t_entry"] = r.t_entry;
    return j;
}

}  // namespace rsim::ssm
