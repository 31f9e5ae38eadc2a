#pragma once

// Infrastructure warning logic: constant-velocity collision prediction
// along the fixed travel paths, and a per-trial monitor that issues at
// most one warning when the predicted collision comes within the
// configured lead time.

#include <cmath>
#include <optional>

#include "rsim/common.hpp"
#include "rsim/geometry.hpp"
#include "rsim/levels.hpp"
#include "rsim/trajectory.hpp"

namespace rsim::warning {

struct PredictionConfig {
    double horizon = 10.0;      // seconds of lookahead
    double coarse_step = 0.02;  // grid used to bracket the first contact
    double refine_tol = 1e-9;   // bisection tolerance on the crossing time

    void validate() const {
        if (horizon <= 0.0 || coarse_step <= 0.0 || refine_tol <= 0.0) {
            throw DataError("PredictionConfig: all fields must be positive");
        }
        if (coarse_step > horizon) {
            throw DataError("PredictionConfig: coarse_step exceeds horizon");
        }
    }
};

// Earliest time offset (seconds from now, within the horizon) at which the
// two vehicles' centers would come within `combined_radius` of each other
// if both kept their current speeds along their paths. Vehicles reaching a
// path end are treated as stopping there. Returns nullopt when no contact
// is predicted.
inline std::optional<double> predict_collision_time(const geom::PathGeometry& g,
                                                    double ego_s, double ego_v,
                                                    double agg_s, double agg_v,
                                                    double combined_radius,
                                                    const PredictionConfig& cfg = {}) {
    cfg.validate();
    if (combined_radius <= 0.0) {
        throw DataError("predict_collision_time: combined_radius must be positive");
    }
    if (ego_v < 0.0 || agg_v < 0.0) {
        throw DataError("predict_collision_time: speeds must be non-negative");
    }
    auto distance_at = [&](double tau) {
        const geom::Vec2 pe = g.ego_path.position(ego_s + ego_v * tau);
        const geom::Vec2 pa = g.aggressive_path.position(agg_s + agg_v * tau);
        return geom::norm(pe - pa);
    };
    double prev_tau = 0.0;
    double prev_d = distance_at(0.0);
    if (prev_d <= combined_radius) {
        return 0.0;
    }
    const int n = static_cast<int>(std::ceil(cfg.horizon / cfg.coarse_step));
    for (int k = 1; k <= n; ++k) {
        const double tau = std::min(cfg.horizon, k * cfg.coarse_step);
        const double d = distance_at(tau);
        if (d <= combined_radius) {
            // Bisect the bracketing interval for the first crossing.
            double lo = prev_tau;  // distance > radius
            double hi = tau;       // distance <= radius
            while (hi - lo > cfg.refine_tol) {
                const double mid = 0.5 * (lo + hi);
                if (distance_at(mid) <= combined_radius) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return hi;
        }
        prev_tau = tau;
        prev_d = d;
    }
    (void)prev_d;
    return std::nullopt;
}

struct WarningEvent {
    double t_issue = 0.0;                 // = t_predicted_collision - lead
    double t_predicted_collision = 0.0;   // absolute trial time
    double lead = 0.0;                    // seconds of advance notice
    WarningLevel level = WarningLevel::None;
    TrajectoryPoint ego_state;            // states at the issuing step
    TrajectoryPoint aggressive_state;
};

// Re-evaluates the prediction each step and issues at most one warning,
// the first time the predicted collision lies within the lead time.
// A zero lead (no warning service) never issues.
class Monitor {
  public:
    Monitor(WarningLevel level, const geom::PathGeometry& geometry,
            double combined_radius, PredictionConfig cfg = {})
        : level_(level),
          lead_(warning_lead_seconds(level)),
          geometry_(&geometry),
          combined_radius_(combined_radius),
          cfg_(cfg) {
        cfg_.validate();
    }

    bool issued() const { return event_.has_value(); }
    const std::optional<WarningEvent>& event() const { return event_; }

    // Call once per simulation step with the current along-path states.
    // Returns the warning event on the step it is issued, else nullopt.
    std::optional<WarningEvent> step(double t_now, const TrajectoryPoint& ego_state,
                                     double ego_s, const TrajectoryPoint& agg_state,
                                     double agg_s) {
        if (level_ == WarningLevel::None || event_.has_value()) {
            return std::nullopt;
        }
        const auto tau = predict_collision_time(*geometry_, ego_s, ego_state.v, agg_s,
                                                agg_state.v, combined_radius_, cfg_);
        if (!tau.has_value() || *tau > lead_) {
            return std::nullopt;
        }
        WarningEvent ev;
        ev.t_predicted_collision = t_now + *tau;
        ev.lead = lead_;
        ev.t_issue = ev.t_predicted_collision - lead_;
        ev.level = level_;
        ev.ego_state = ego_state;
        ev.aggressive_state = agg_state;
        event_ = ev;
        return event_;
    }

  private:
    WarningLevel level_;
    double lead_;
    const geom::PathGeometry* geometry_;
    double combined_radius_;
    PredictionConfig cfg_;
    std::optional<WarningEvent> event_;
};

}  // namespace rsim::warning
