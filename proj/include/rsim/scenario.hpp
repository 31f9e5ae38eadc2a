#pragma once

// Two-vehicle merging-conflict generator: an ego vehicle circulating
// through a roundabout while an aggressive vehicle enters against the
// ego's right of way at a configurable severity level, optionally under
// an advance collision warning. Produces sampled trajectories plus the
// bookkeeping needed by the safety metrics and the intent features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "rsim/common.hpp"
#include "rsim/geometry.hpp"
#include "rsim/levels.hpp"
#include "rsim/ssm.hpp"
#include "rsim/trajectory.hpp"
#include "rsim/warning.hpp"

namespace rsim::scenario {

// ---------------------------------------------------------------------------
// Driver model
// ---------------------------------------------------------------------------

struct DriverModel {
    double reaction_time = 0.4;  // s, from warning receipt to pedal input
    double visual_lag = 0.3;     // extra recognition delay without a warning
    // Unaided threat judgment at the intruder's yield-line crossing: alarm
    // if, at this deceleration, the intruder could no longer stop short of
    // the conflict circle.
    double visual_judgment_decel = 4.0;  // m/s^2 magnitude
    double comfortable_decel = -7.8;     // m/s^2
    double emergency_decel = -10.5;    // m/s^2, must be <= comfortable - 0.5
    double precautionary_decel = -3.0; // m/s^2, used when there is ample time
    double go_accel = 2.0;             // m/s^2 applied on a Go decision
    double approach_limit = 45.0 * kMphToMps;     // 20.1168 m/s
    double circulating_limit = 15.0 * kMphToMps;  // 6.7056 m/s
    Decision decision = Decision::Stop;
    bool use_headway_threshold = false;  // when set, Go iff |headway| >= threshold
    double go_headway_threshold = 1.0;   // s
    double brake_ramp_time = 0.3;        // s to reach the target deceleration
    double budget_floor = 0.15;          // urgency map knots (seconds of budget)
    double budget_comfort = 1.5;
    double budget_relax = 2.5;
    double keep_clear_margin = 0.0;      // extra metres beyond the combined radius
    double control_gain = 0.5;           // 1/s proportional speed tracking
    double accel_min = -3.0;             // normal-driving clamp
    double accel_max = 2.0;
    double envelope_decel = 2.2;         // entry-speed envelope deceleration

    void validate() const {
        if (reaction_time < 0.0 || visual_lag < 0.0) {
            throw DataError("DriverModel: reaction_time and visual_lag must be >= 0");
        }
        if (comfortable_decel >= 0.0 || emergency_decel >= 0.0 || precautionary_decel >= 0.0) {
            throw DataError("DriverModel: deceleration values must be negative");
        }
        if (emergency_decel > comfortable_decel - 0.5) {
            throw DataError("DriverModel: emergency_decel must be at most comfortable_decel - 0.5");
        }
        if (go_accel <= 0.0 || brake_ramp_time <= 0.0 || control_gain <= 0.0) {
            throw DataError("DriverModel: go_accel, brake_ramp_time, control_gain must be positive");
        }
        if (approach_limit <= 0.0 || circulating_limit <= 0.0 ||
            circulating_limit >= approach_limit) {
            throw DataError("DriverModel: speed limits must satisfy 0 < circulating < approach");
        }
        if (!(budget_floor < budget_comfort && budget_comfort < budget_relax)) {
            throw DataError("DriverModel: urgency budget knots must be increasing");
        }
        if (accel_min >= 0.0 || accel_max <= 0.0 || envelope_decel <= 0.0) {
            throw DataError("DriverModel: invalid control clamps");
        }
        if (visual_judgment_decel <= 0.0 || go_headway_threshold <= 0.0) {
            throw DataError("DriverModel: thresholds must be positive");
        }
        if (keep_clear_margin < 0.0) {
            throw DataError("DriverModel: keep_clear_margin must be >= 0");
        }
    }

    // Target deceleration for a Stop response given the time budget between
    // braking onset and the predicted collision: scarce budgets demand the
    // emergency rate, generous ones only a precautionary slowdown.
    double stop_target_decel(double budget) const {
        if (budget <= budget_floor) {
            return emergency_decel;
        }
        if (budget <= budget_comfort) {
            const double f = (budget - budget_floor) / (budget_comfort - budget_floor);
            return emergency_decel + f * (comfortable_decel - emergency_decel);
        }
        if (budget <= budget_relax) {
            const double f = (budget - budget_comfort) / (budget_relax - budget_comfort);
            return comfortable_decel + f * (precautionary_decel - comfortable_decel);
        }
        return precautionary_decel;
    }
};

// ---------------------------------------------------------------------------
// Aggressive-vehicle profiles
// ---------------------------------------------------------------------------

struct AggressiveParams {
    double approach_speed = 9.0;       // m/s on the entry leg
    double medium_creep_speed = 1.5;   // m/s while easing across the conflict point
    double medium_brake_decel = 4.0;   // magnitude of the slow-down into the creep
    double medium_creep_setback = 10.0;  // creep begins this far before the conflict point
    double medium_clear_offset = 0.5;    // m past the conflict where the creep ends
    double medium_spawn_s = 20.0;        // path arclength where the medium profile starts
    double low_cruise_speed = 7.0;     // m/s
    double low_brake_decel = 2.0;      // magnitude of the gentle stop at the yield line
    double low_spawn_s = 30.0;
    double low_clearance_lead = 4.0;   // s before the ego's arrival by which Low is stopped
    double exit_accel = 2.0;           // m/s^2 applied once clear of the conflict
    double medium_headway = 1.5;       // s, magnitude of the entry headway
    double high_headway = 0.5;         // s
    double resume_clearance = 5.0;     // m past the conflict point counting as "clear"

    void validate() const {
        if (approach_speed <= 0.0 || medium_creep_speed <= 0.0 || low_cruise_speed <= 0.0) {
            throw DataError("AggressiveParams: speeds must be positive");
        }
        if (medium_creep_speed >= approach_speed) {
            throw DataError("AggressiveParams: creep speed must be below the approach speed");
        }
        if (medium_brake_decel <= 0.0 || low_brake_decel <= 0.0 || exit_accel <= 0.0) {
            throw DataError("AggressiveParams: accelerations must be positive magnitudes");
        }
        if (medium_headway <= 0.0 || high_headway <= 0.0 || medium_headway <= high_headway) {
            throw DataError("AggressiveParams: need medium_headway > high_headway > 0");
        }
        if (medium_spawn_s < 0.0 || low_spawn_s < 0.0 || medium_creep_setback <= 0.0) {
            throw DataError("AggressiveParams: invalid spawn/setback");
        }
        if (low_clearance_lead <= 0.0 || resume_clearance <= 0.0) {
            throw DataError("AggressiveParams: clearances must be positive");
        }
        if (medium_clear_offset <= 0.0 || medium_clear_offset >= resume_clearance) {
            throw DataError(
                "AggressiveParams: medium_clear_offset must lie in (0, resume_clearance)");
        }
    }
};

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

struct ScenarioConfig {
    int schema_version = 1;
    double dt = 0.1;
    double timeout = 60.0;
    std::uint64_t seed = 0;
    int repeats = 2;
    double jitter_std = 0.10;        // fractional std for per-repeat driver jitter
    double ego_radius = 1.5;         // m
    double aggressive_radius = 1.5;  // m
    geom::RoundaboutLayout layout;
    DriverModel driver;
    AggressiveParams aggressive;
    warning::PredictionConfig prediction{10.0, 0.05, 1e-9};

    double combined_radius() const { return ego_radius + aggressive_radius; }

    void validate() const {
        if (schema_version != 1) {
            throw DataError("ScenarioConfig: unsupported schema_version");
        }
        if (dt <= 0.0 || dt > 1.0) {
            throw DataError("ScenarioConfig: dt must be in (0, 1]");
        }
        if (timeout <= 0.0 || repeats < 1) {
            throw DataError("ScenarioConfig: timeout and repeats must be positive");
        }
        if (jitter_std < 0.0 || jitter_std > 0.5) {
            throw DataError("ScenarioConfig: jitter_std must be in [0, 0.5]");
        }
        if (ego_radius <= 0.0 || aggressive_radius <= 0.0) {
            throw DataError("ScenarioConfig: vehicle radii must be positive");
        }
        layout.validate();
        driver.validate();
        aggressive.validate();
        prediction.validate();
    }
};

// ---------------------------------------------------------------------------
// Trial results
// ---------------------------------------------------------------------------

enum class EndReason { BothPassed, Contact };

inline const char* end_reason_name(EndReason r) {
    return r == EndReason::Contact ? "contact" : "both_passed";
}

struct TrialResult {
    Aggressiveness level = Aggressiveness::Low;
    WarningLevel warning = WarningLevel::None;
    int repeat = 0;
    DriverModel driver;  // the jittered parameters actually used
    Decision decision = Decision::Stop;
    Trajectory ego;
    Trajectory aggressive;
    std::vector<double> ego_s;         // along-path arclength per ego sample
    std::vector<double> aggressive_s;  // along-path arclength per aggressive sample
    std::optional<warning::WarningEvent> warning_event;
    std::optional<double> visual_detect_time;
    std::optional<double> response_onset;  // first instant of the driver's response
    bool collision = false;
    EndReason end_reason = EndReason::BothPassed;
    double t_end = 0.0;
    double t_ego_entry = 0.0;                    // ego crosses into the roundabout
    std::optional<double> t_ego_conflict;        // ego crosses the conflict point
    std::optional<double> t_aggressive_entry;    // aggressive crosses the conflict point
    std::optional<double> realized_entry_headway;  // signed, vs the unperturbed ego plan
    double launch_time = 0.0;
    double spawn_s = 0.0;
};

// ---------------------------------------------------------------------------
// Unperturbed ego plan (used for scheduling and headway accounting)
// ---------------------------------------------------------------------------

struct EgoPlan {
    std::vector<double> t;
    std::vector<double> s;
    std::vector<double> v;
    double t_entry = 0.0;
    double t_conflict = 0.0;

    // Past the recorded horizon the plan continues at its final speed.
    double s_at(double time) const {
        if (time >= t.back()) {
            return s.back() + (time - t.back()) * v.back();
        }
        return interp(t, s, time);
    }
    double v_at(double time) const {
        if (time >= t.back()) {
            return v.back();
        }
        return interp(t, v, time);
    }

  private:
    static double interp(const std::vector<double>& xs, const std::vector<double>& ys,
                         double x) {
        if (xs.empty()) {
            throw DataError("EgoPlan: empty plan");
        }
        if (x <= xs.front()) {
            return ys.front();
        }
        auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
        const double f = (x - xs[i]) / (xs[i + 1] - xs[i]);
        return ys[i] + f * (ys[i + 1] - ys[i]);
    }
};

namespace detail {

inline double ego_target_speed(const ScenarioConfig& cfg, double s) {
    const double entry = cfg.layout.approach_length;
    const double arc_end = entry + 0.5 * 3.14159265358979323846 * cfg.layout.circulating_radius;
    const DriverModel& d = cfg.driver;
    if (s < entry) {
        const double env = std::sqrt(d.circulating_limit * d.circulating_limit +
                                     2.0 * d.envelope_decel * (entry - s));
        return std::min(d.approach_limit, env);
    }
    if (s < arc_end) {
        return d.circulating_limit;
    }
    return d.approach_limit;
}

// Proportional speed tracking with an entry-envelope feedforward. Tiny
// commands are snapped to zero so steady circulating driving does not
// register as micro-braking in the deceleration statistics.
inline double ego_normal_accel(const ScenarioConfig& cfg, const DriverModel& d, double s,
                               double v) {
    const double vt = ego_target_speed(cfg, s);
    double ff = 0.0;
    if (s < cfg.layout.approach_length && vt < d.approach_limit) {
        ff = -d.envelope_decel * std::min(v / std::max(vt, 0.5), 1.3);
    }
    double a = d.control_gain * (vt - v) + ff;
    a = std::clamp(a, d.accel_min, d.accel_max);
    if (std::abs(a) < 0.06) {
        a = 0.0;
    }
    return a;
}

// Piecewise aggressive-vehicle acceleration command. `resume` gates the
// Low profile's departure after its stop at the yield line.
inline double aggressive_accel(const ScenarioConfig& cfg, Aggressiveness level, double s,
                               double v, bool resume, double dt) {
    const AggressiveParams& p = cfg.aggressive;
    const geom::RoundaboutLayout& lay = cfg.layout;
    const double conflict_s = lay.aggressive_spawn_distance;
    const double yield_s = conflict_s - lay.yield_line_setback;
    switch (level) {
        case Aggressiveness::High:
            return 0.0;
        case Aggressiveness::Medium: {
            const double brake_start =
                conflict_s - p.medium_creep_setback -
                (p.approach_speed * p.approach_speed -
                 p.medium_creep_speed * p.medium_creep_speed) /
                    (2.0 * p.medium_brake_decel);
            if (s >= conflict_s + p.medium_clear_offset && v < p.approach_speed) {
                return std::min(p.exit_accel, (p.approach_speed - v) / dt);
            }
            if (s >= brake_start && v > p.medium_creep_speed) {
                return std::max(-p.medium_brake_decel, (p.medium_creep_speed - v) / dt);
            }
            // Brake-onset straddle: apply the distance-weighted fraction of
            // the deceleration so the step ends on the nominal profile
            // regardless of how the grid phases against the onset point.
            if (v > p.medium_creep_speed && s < brake_start && s + v * dt > brake_start) {
                const double delay = (brake_start - s) / v;
                const double frac = std::clamp(1.0 - delay / dt, 0.0, 1.0);
                return std::max(-p.medium_brake_decel * frac,
                                (p.medium_creep_speed - v) / dt);
            }
            return 0.0;
        }
        case Aggressiveness::Low: {
            if (resume) {
                if (v < p.low_cruise_speed) {
                    return std::min(p.exit_accel, (p.low_cruise_speed - v) / dt);
                }
                return 0.0;
            }
            const double brake_start =
                yield_s - p.low_cruise_speed * p.low_cruise_speed / (2.0 * p.low_brake_decel);
            if (s < brake_start) {
                return 0.0;
            }
            const double d_remaining = yield_s - s;
            if (d_remaining <= 1e-4 || v <= 0.05) {
                return -v / dt;  // settle to rest at the line
            }
            const double needed = v * v / (2.0 * d_remaining);
            return -std::min(needed, 1.5 * p.low_brake_decel);
        }
    }
    return 0.0;
}

}  // namespace detail

// Simulate the ego vehicle alone under normal control. The plan defines the
// scheduling reference: the aggressive vehicle's timing targets are set
// against this unperturbed arrival at the conflict point.
inline EgoPlan plan_ego(const ScenarioConfig& cfg, const geom::PathGeometry& g) {
    EgoPlan plan;
    double s = 0.0;
    double v = cfg.driver.approach_limit;
    const double limit = g.ego_path.length() - 0.5;
    for (double t = 0.0; t <= cfg.timeout + 1e-9; t += cfg.dt) {
        plan.t.push_back(t);
        plan.s.push_back(s);
        plan.v.push_back(v);
        if (s >= limit) {
            break;
        }
        const double a = detail::ego_normal_accel(cfg, cfg.driver, s, v);
        const double v_next = std::max(0.0, v + a * cfg.dt);
        s += 0.5 * (v + v_next) * cfg.dt;
        v = v_next;
    }
    auto crossing = [&](double target) -> std::optional<double> {
        for (std::size_t i = 0; i + 1 < plan.s.size(); ++i) {
            if (plan.s[i] < target && plan.s[i + 1] >= target) {
                const double f = (target - plan.s[i]) / (plan.s[i + 1] - plan.s[i]);
                return plan.t[i] + f * (plan.t[i + 1] - plan.t[i]);
            }
        }
        return std::nullopt;
    };
    const auto entry = crossing(g.roundabout_entry_s_ego);
    const auto conflict = crossing(g.conflict_s_ego);
    if (!entry.has_value() || !conflict.has_value()) {
        throw ScheduleError("plan_ego: ego never reaches the conflict point");
    }
    plan.t_entry = *entry;
    plan.t_conflict = *conflict;
    return plan;
}

// ---------------------------------------------------------------------------
// Aggressive-vehicle scheduling
// ---------------------------------------------------------------------------

struct Schedule {
    double launch_time = 0.0;  // when the aggressive vehicle starts moving
    double spawn_s = 0.0;      // its starting arclength
    double target_time = 0.0;  // intended conflict-crossing (or full-stop) time
};

namespace detail {

struct ProfileTrace {
    std::vector<double> t;  // since launch
    std::vector<double> s;
    std::vector<double> v;
};

inline ProfileTrace trace_aggressive(const ScenarioConfig& cfg, Aggressiveness level,
                                     double spawn_s, double horizon) {
    ProfileTrace tr;
    double s = spawn_s;
    double v = level == Aggressiveness::Low ? cfg.aggressive.low_cruise_speed
                                            : cfg.aggressive.approach_speed;
    for (double t = 0.0; t <= horizon; t += cfg.dt) {
        tr.t.push_back(t);
        tr.s.push_back(s);
        tr.v.push_back(v);
        const double a = aggressive_accel(cfg, level, s, v, /*resume=*/false, cfg.dt);
        const double v_next = std::max(0.0, v + a * cfg.dt);
        s += 0.5 * (v + v_next) * cfg.dt;
        v = v_next;
    }
    return tr;
}

inline std::optional<double> trace_crossing(const ProfileTrace& tr, double target_s) {
    for (std::size_t i = 0; i + 1 < tr.s.size(); ++i) {
        if (tr.s[i] < target_s && tr.s[i + 1] >= target_s) {
            const double f = (target_s - tr.s[i]) / (tr.s[i + 1] - tr.s[i]);
            return tr.t[i] + f * (tr.t[i + 1] - tr.t[i]);
        }
    }
    return std::nullopt;
}

inline std::optional<double> trace_stop_time(const ProfileTrace& tr) {
    for (std::size_t i = 1; i < tr.v.size(); ++i) {
        if (tr.v[i] <= 1e-9 && tr.v[i - 1] > 1e-9) {
            return tr.t[i];
        }
    }
    return std::nullopt;
}

}  // namespace detail

// Choose the launch time (and, when a launch delay alone cannot achieve it,
// the spawn position) so that the aggressive vehicle meets its timing
// target: crossing the conflict point `headway` seconds before the
// unperturbed ego for Medium/High, or completing its stop at the yield line
// `low_clearance_lead` seconds before the ego's arrival for Low.
inline Schedule schedule_aggressive(const ScenarioConfig& cfg, Aggressiveness level,
                                    const geom::PathGeometry& g, const EgoPlan& plan) {
    const AggressiveParams& p = cfg.aggressive;
    Schedule sched;
    sched.spawn_s = level == Aggressiveness::Low      ? p.low_spawn_s
                    : level == Aggressiveness::Medium ? p.medium_spawn_s
                                                      : 0.0;
    const double v0 = level == Aggressiveness::Low ? p.low_cruise_speed : p.approach_speed;

    const auto trace = detail::trace_aggressive(cfg, level, sched.spawn_s, cfg.timeout);
    double event_time;  // profile time of the scheduled event, measured from launch
    if (level == Aggressiveness::Low) {
        const auto stop = detail::trace_stop_time(trace);
        if (!stop.has_value()) {
            throw ScheduleError("schedule_aggressive: Low profile never stops");
        }
        event_time = *stop;
        sched.target_time = plan.t_conflict - p.low_clearance_lead;
    } else {
        const auto cross = detail::trace_crossing(trace, g.conflict_s_agg);
        if (!cross.has_value()) {
            throw ScheduleError("schedule_aggressive: profile never crosses the conflict point");
        }
        event_time = *cross;
        const double headway =
            level == Aggressiveness::Medium ? p.medium_headway : p.high_headway;
        sched.target_time = plan.t_conflict - headway;
    }

    double launch = sched.target_time - event_time;
    if (launch >= 0.0) {
        sched.launch_time = launch;
        return sched;
    }
    // Launching at t=0 is still too late: move the spawn forward along the
    // initial cruise so the event lands on target. Valid only while the
    // shift stays inside the constant-speed leg.
    const double shift = -launch * v0;
    const double cruise_end_s = [&] {
        const double conflict_s = g.conflict_s_agg;
        switch (level) {
            case Aggressiveness::Medium:
                return conflict_s - p.medium_creep_setback -
                       (p.approach_speed * p.approach_speed -
                        p.medium_creep_speed * p.medium_creep_speed) /
                           (2.0 * p.medium_brake_decel);
            case Aggressiveness::Low:
                return (conflict_s - cfg.layout.yield_line_setback) -
                       p.low_cruise_speed * p.low_cruise_speed / (2.0 * p.low_brake_decel);
            case Aggressiveness::High:
                return conflict_s;
        }
        return conflict_s;
    }();
    if (sched.spawn_s + shift >= cruise_end_s - 1e-6) {
        throw ScheduleError("schedule_aggressive: timing target infeasible even from the "
                            "closest admissible spawn");
    }
    sched.spawn_s += shift;
    sched.launch_time = 0.0;
    return sched;
}

// ---------------------------------------------------------------------------
// Trial simulation
// ---------------------------------------------------------------------------

inline TrialResult simulate_trial(const ScenarioConfig& cfg, Aggressiveness level,
                                  WarningLevel warn, const DriverModel& driver,
                                  int repeat = 0) {
    cfg.validate();
    driver.validate();
    const geom::PathGeometry g = geom::make_roundabout_geometry(cfg.layout);
    const EgoPlan plan = plan_ego(cfg, g);
    const Schedule sched = schedule_aggressive(cfg, level, g, plan);
    const double dt = cfg.dt;
    const double r_sum = cfg.combined_radius();
    const double yield_s = g.yield_line_s_agg;

    warning::Monitor monitor(warn, g, r_sum, cfg.prediction);

    TrialResult res;
    res.level = level;
    res.warning = warn;
    res.repeat = repeat;
    res.driver = driver;
    res.decision = driver.decision;
    res.launch_time = sched.launch_time;
    res.spawn_s = sched.spawn_s;
    res.ego.vehicle_id = "ego";
    res.ego.dt = dt;
    res.aggressive.vehicle_id = "aggressive";
    res.aggressive.dt = dt;

    // Ego state.
    double ego_s = 0.0;
    double ego_v = driver.approach_limit;
    // Aggressive state (valid once started).
    bool agg_started = false;
    double agg_s = 0.0;
    double agg_v = 0.0;
    bool agg_resume = false;

    // Driver response state.
    bool yield_crossed = false;
    bool triggered = false;
    bool decision_resolved = false;
    double brake_cmd = 0.0;
    double stop_target_mag = 0.0;  // committed braking strength, set once
    bool stop_target_set = false;
    bool released = false;
    std::optional<double> warned_onset;   // t_issue + reaction
    std::optional<double> visual_onset;   // detect + visual_lag + reaction
    double response_budget = 0.0;         // onset -> predicted collision (warned only)
    bool response_warned = false;

    auto record = [&](const geom::Path& path, Trajectory& traj, std::vector<double>& s_series,
                      double t, double s, double v, double a) {
        TrajectoryPoint pt;
        pt.t = t;
        const geom::Vec2 p = path.position(s);
        pt.x = p.x;
        pt.y = p.y;
        pt.v = v;
        pt.a = a;
        pt.heading = path.heading(s);
        traj.points.push_back(pt);
        s_series.push_back(s);
    };

    const int max_steps = static_cast<int>(std::ceil(cfg.timeout / dt)) + 1;
    bool contact = false;
    double t = 0.0;
    for (int k = 0; k < max_steps; ++k) {
        t = k * dt;
        // Start the intruder once its launch time has passed; bridge the
        // off-grid launch instant with its constant initial speed.
        if (!agg_started && t >= sched.launch_time - 1e-9) {
            const double v0 = level == Aggressiveness::Low ? cfg.aggressive.low_cruise_speed
                                                           : cfg.aggressive.approach_speed;
            agg_s = sched.spawn_s + (t - sched.launch_time) * v0;
            agg_v = v0;
            agg_started = true;
        }

        const bool ego_passed = ego_s > g.conflict_s_ego + cfg.aggressive.resume_clearance;
        const bool agg_passed =
            agg_started && agg_s > g.conflict_s_agg + cfg.aggressive.resume_clearance;

        // Warning service.
        if (agg_started && !ego_passed && !monitor.issued()) {
            TrajectoryPoint ego_pt;
            ego_pt.t = t;
            ego_pt.v = ego_v;
            const geom::Vec2 pe = g.ego_path.position(ego_s);
            ego_pt.x = pe.x;
            ego_pt.y = pe.y;
            ego_pt.heading = g.ego_path.heading(ego_s);
            TrajectoryPoint agg_pt;
            agg_pt.t = t;
            agg_pt.v = agg_v;
            const geom::Vec2 pa = g.aggressive_path.position(agg_s);
            agg_pt.x = pa.x;
            agg_pt.y = pa.y;
            agg_pt.heading = g.aggressive_path.heading(agg_s);
            const auto ev = monitor.step(t, ego_pt, ego_s, agg_pt, agg_s);
            if (ev.has_value()) {
                res.warning_event = ev;
                warned_onset = ev->t_issue + driver.reaction_time;
            }
        }
        // Unaided visual detection: a one-shot judgment at the instant the
        // intruder crosses its yield line. The driver alarms only if the
        // crossing speed is too high for the intruder to stop short of the
        // conflict circle at a plausible deceleration; a crawl across the
        // line reads as a cautious entry and draws no response.
        if (agg_started && !yield_crossed && agg_s >= yield_s) {
            yield_crossed = true;
            const double room = (g.conflict_s_agg - agg_s) - r_sum;
            const double stop_dist =
                agg_v * agg_v / (2.0 * driver.visual_judgment_decel);
            if (!ego_passed && ego_s < g.conflict_s_ego && stop_dist > room) {
                res.visual_detect_time = t;
                visual_onset = t + driver.visual_lag + driver.reaction_time;
            }
        }

        // Trigger the response at the earlier of the two onsets.
        if (!triggered) {
            std::optional<double> onset;
            bool from_warning = false;
            if (warned_onset.has_value() && t >= *warned_onset - 1e-9) {
                onset = warned_onset;
                from_warning = true;
            }
            if (!onset.has_value() && visual_onset.has_value() && t >= *visual_onset - 1e-9) {
                onset = visual_onset;
            }
            if (onset.has_value() && ego_s < g.conflict_s_ego) {
                triggered = true;
                response_warned = from_warning;
                res.response_onset = *onset;
                if (from_warning) {
                    response_budget = res.warning_event->t_predicted_collision - *onset;
                }
                if (!decision_resolved) {
                    if (driver.use_headway_threshold) {
                        double h_mag = std::numeric_limits<double>::infinity();
                        if (agg_started && agg_v > 1e-9 && ego_v > 1e-9) {
                            const double h = (g.conflict_s_agg - agg_s) / agg_v -
                                             (g.conflict_s_ego - ego_s) / ego_v;
                            h_mag = std::abs(h);
                        }
                        res.decision =
                            h_mag >= driver.go_headway_threshold ? Decision::Go : Decision::Stop;
                    } else {
                        res.decision = driver.decision;
                    }
                    decision_resolved = true;
                }
            }
        }

        // Ego acceleration command.
        double ego_a;
        if (triggered && res.decision == Decision::Stop && !released) {
            if (agg_passed) {
                released = true;  // conflict cleared; resume normal driving
            }
            if (!released && ego_v > 0.0) {
                // The driver commits to one braking strength at the first
                // braked step: the urgency-mapped rate, escalated to whatever
                // rate would stop the car short of the keep-clear bubble
                // around the conflict point, and capped at the emergency
                // capability.
                if (!stop_target_set) {
                    double target_mag = response_warned
                                            ? -driver.stop_target_decel(response_budget)
                                            : -driver.emergency_decel;
                    const double keep_clear = r_sum + driver.keep_clear_margin;
                    const double d_eff = (g.conflict_s_ego - keep_clear) - ego_s;
                    double needed = -driver.emergency_decel;
                    if (d_eff > 0.05) {
                        needed = ego_v * ego_v / (2.0 * d_eff);
                    }
                    stop_target_mag =
                        std::min(std::max(target_mag, needed), -driver.emergency_decel);
                    stop_target_set = true;
                }
                const double rate = stop_target_mag / driver.brake_ramp_time;
                brake_cmd = std::max(-stop_target_mag, brake_cmd - rate * dt);
                ego_a = brake_cmd;
            } else if (!released) {
                ego_a = 0.0;  // holding at rest until the intruder clears
            } else {
                ego_a = detail::ego_normal_accel(cfg, driver, ego_s, ego_v);
            }
        } else if (triggered && res.decision == Decision::Go &&
                   ego_s <= g.conflict_s_ego + cfg.aggressive.resume_clearance) {
            const double cap = 1.2 * driver.circulating_limit;
            ego_a = ego_v < cap ? std::min(driver.go_accel, (cap - ego_v) / dt) : 0.0;
        } else {
            ego_a = detail::ego_normal_accel(cfg, driver, ego_s, ego_v);
        }

        // Aggressive acceleration command.
        double agg_a = 0.0;
        if (agg_started) {
            if (level == Aggressiveness::Low && !agg_resume && ego_passed) {
                agg_resume = true;
            }
            agg_a = detail::aggressive_accel(cfg, level, agg_s, agg_v, agg_resume, dt);
        }

        // Integrate (trapezoidal displacement) and record the step.
        const double ego_v_next = std::max(0.0, ego_v + ego_a * dt);
        const double ego_a_eff = (ego_v_next - ego_v) / dt;
        record(g.ego_path, res.ego, res.ego_s, t, ego_s, ego_v, ego_a_eff);
        if (agg_started) {
            const double agg_v_next = std::max(0.0, agg_v + agg_a * dt);
            const double agg_a_eff = (agg_v_next - agg_v) / dt;
            record(g.aggressive_path, res.aggressive, res.aggressive_s, t, agg_s, agg_v,
                   agg_a_eff);
            // Contact check on the just-recorded synchronous pair.
            const geom::Vec2 pe = g.ego_path.position(ego_s);
            const geom::Vec2 pa = g.aggressive_path.position(agg_s);
            if (geom::norm(pe - pa) <= r_sum) {
                contact = true;
                res.t_end = t;
                break;
            }
            agg_s += 0.5 * (agg_v + agg_v_next) * dt;
            agg_v = agg_v_next;
        }
        ego_s += 0.5 * (ego_v + ego_v_next) * dt;
        ego_v = ego_v_next;

        if (ego_passed && agg_passed) {
            res.t_end = t;
            break;
        }
        if (t + dt > cfg.timeout + 1e-9) {
            throw TimeoutError("simulate_trial: trial exceeded the 60 s budget");
        }
    }

    res.collision = contact;
    res.end_reason = contact ? EndReason::Contact : EndReason::BothPassed;
    if (res.t_end == 0.0) {
        res.t_end = t;
    }

    auto series_crossing = [&](const std::vector<double>& s_series, const Trajectory& traj,
                               double target) -> std::optional<double> {
        for (std::size_t i = 0; i + 1 < s_series.size(); ++i) {
            if (s_series[i] < target && s_series[i + 1] >= target) {
                const double f = (target - s_series[i]) / (s_series[i + 1] - s_series[i]);
                return traj.points[i].t + f * (traj.points[i + 1].t - traj.points[i].t);
            }
        }
        return std::nullopt;
    };
    res.t_ego_entry = series_crossing(res.ego_s, res.ego, g.roundabout_entry_s_ego)
                          .value_or(plan.t_entry);
    res.t_ego_conflict = series_crossing(res.ego_s, res.ego, g.conflict_s_ego);
    res.t_aggressive_entry =
        series_crossing(res.aggressive_s, res.aggressive, g.conflict_s_agg);

    if (res.t_aggressive_entry.has_value() && level != Aggressiveness::Low) {
        // Entry headway against the unperturbed ego plan (the schedule's
        // defining quantity; the realized ego may already be braking).
        const double tx = *res.t_aggressive_entry;
        const double d_ego = g.conflict_s_ego - plan.s_at(tx);
        const double v_ego = plan.v_at(tx);
        if (v_ego > 1e-9) {
            res.realized_entry_headway = 0.0 - d_ego / v_ego;  // intruder is at the point
        }
    }
    return res;
}

// Distance-to-conflict bookkeeping for the surrogate safety measures,
// derived from the recorded along-path arclengths.
inline ssm::ConflictGeometry make_conflict_geometry(const TrialResult& r,
                                                    const geom::PathGeometry& g) {
    ssm::ConflictGeometry cg;
    const geom::Vec2 m = g.ego_path.position(g.conflict_s_ego);
    cg.conflict_x = m.x;
    cg.conflict_y = m.y;
    cg.dist_to_conflict_i.reserve(r.ego_s.size());
    for (const double s : r.ego_s) {
        cg.dist_to_conflict_i.push_back(g.conflict_s_ego - s);
    }
    cg.dist_to_conflict_j.reserve(r.aggressive_s.size());
    for (const double s : r.aggressive_s) {
        cg.dist_to_conflict_j.push_back(g.conflict_s_agg - s);
    }
    return cg;
}

// Full surrogate-safety evaluation of a simulated trial, with the exposure
// window anchored at the ego's roundabout entry.
inline ssm::SafetyReport trial_safety_report(const ScenarioConfig& cfg, const TrialResult& r) {
    const geom::PathGeometry g = geom::make_roundabout_geometry(cfg.layout);
    ssm::VehicleSpec ego_spec;
    ego_spec.radius = cfg.ego_radius;
    ssm::VehicleSpec agg_spec;
    agg_spec.radius = cfg.aggressive_radius;
    return ssm::safety_report(r.ego, r.aggressive, ego_spec, agg_spec,
                              make_conflict_geometry(r, g), r.t_ego_entry);
}

// ---------------------------------------------------------------------------
// Factorial design runner
// ---------------------------------------------------------------------------

struct DesignResult {
    std::vector<TrialResult> trials;  // ordered by (level, warning, repeat)
};

inline DriverModel jitter_driver(const DriverModel& base, double jitter_std, Rng& rng) {
    DriverModel d = base;
    if (jitter_std > 0.0) {
        d.reaction_time =
            base.reaction_time * (1.0 + jitter_std * rng.normal_truncated3());
        // One braking-strength factor scales both deceleration capabilities,
        // so a timid driver is timid at every urgency and the emergency rate
        // always exceeds the comfortable one by the same ratio.
        const double brake_scale = 1.0 + jitter_std * rng.normal_truncated3();
        d.comfortable_decel = base.comfortable_decel * brake_scale;
        d.emergency_decel = base.emergency_decel * brake_scale;
        d.reaction_time = std::max(0.0, d.reaction_time);
        d.comfortable_decel = std::min(-0.5, d.comfortable_decel);
        d.emergency_decel = std::min(d.emergency_decel, d.comfortable_decel - 0.5);
    }
    return d;
}

// Per-repeat jitter seeds: one independent stream per simulated driver.
inline std::vector<std::uint64_t> design_repeat_seeds(const ScenarioConfig& cfg) {
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(cfg.repeats));
    for (int r = 0; r < cfg.repeats; ++r) {
        seeds.push_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(r) + 1));
    }
    return seeds;
}

inline DesignResult run_design(const ScenarioConfig& cfg,
                               const std::vector<std::uint64_t>& repeat_seeds, int jobs = 1) {
    cfg.validate();
    if (jobs < 1) {
        throw DataError("run_design: jobs must be >= 1");
    }
    if (repeat_seeds.size() != static_cast<std::size_t>(cfg.repeats)) {
        throw DataError("run_design: need exactly one seed per repeat");
    }
    // One jittered driver per repeat, shared across all nine cells, drawn
    // up front so the results are independent of the thread count.
    std::vector<DriverModel> drivers;
    drivers.reserve(static_cast<std::size_t>(cfg.repeats));
    for (int r = 0; r < cfg.repeats; ++r) {
        Rng rng(repeat_seeds[static_cast<std::size_t>(r)]);
        drivers.push_back(jitter_driver(cfg.driver, cfg.jitter_std, rng));
    }

    struct Task {
        Aggressiveness level;
        WarningLevel warning;
        int repeat;
    };
    std::vector<Task> tasks;
    for (const auto level : kAllAggressiveness) {
        for (const auto warn : kAllWarningLevels) {
            for (int r = 0; r < cfg.repeats; ++r) {
                tasks.push_back({level, warn, r});
            }
        }
    }

    DesignResult out;
    out.trials.resize(tasks.size());
    std::vector<std::string> errors(tasks.size());
    auto worker = [&](int worker_idx) {
        for (std::size_t i = static_cast<std::size_t>(worker_idx); i < tasks.size();
             i += static_cast<std::size_t>(jobs)) {
            const Task& tk = tasks[i];
            try {
                out.trials[i] =
                    simulate_trial(cfg, tk.level, tk.warning, drivers[tk.repeat], tk.repeat);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (jobs == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int w = 0; w < jobs; ++w) {
            pool.emplace_back(worker, w);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i].empty()) {
            throw DataError("run_design: trial " + std::to_string(i) + " failed: " + errors[i]);
        }
    }
    return out;
}

inline DesignResult run_design(const ScenarioConfig& cfg, int jobs = 1) {
    return run_design(cfg, design_repeat_seeds(cfg), jobs);
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const DriverModel& d) {
    j = nlohmann::json{{"reaction_time", d.reaction_time},
                       {"visual_lag", d.visual_lag},
                       {"visual_judgment_decel", d.visual_judgment_decel},
                       {"comfortable_decel", d.comfortable_decel},
                       {"emergency_decel", d.emergency_decel},
                       {"precautionary_decel", d.precautionary_decel},
                       {"go_accel", d.go_accel},
                       {"approach_limit", d.approach_limit},
                       {"circulating_limit", d.circulating_limit},
                       {"decision", decision_name(d.decision)},
                       {"use_headway_threshold", d.use_headway_threshold},
                       {"go_headway_threshold", d.go_headway_threshold},
                       {"brake_ramp_time", d.brake_ramp_time},
                       {"budget_floor", d.budget_floor},
                       {"budget_comfort", d.budget_comfort},
                       {"budget_relax", d.budget_relax},
                       {"keep_clear_margin", d.keep_clear_margin},
                       {"control_gain", d.control_gain},
                       {"accel_min", d.accel_min},
                       {"accel_max", d.accel_max},
                       {"envelope_decel", d.envelope_decel}};
}

inline void from_json(const nlohmann::json& j, DriverModel& d) {
    d.reaction_time = j.value("reaction_time", d.reaction_time);
    d.visual_lag = j.value("visual_lag", d.visual_lag);
    d.visual_judgment_decel = j.value("visual_judgment_decel", d.visual_judgment_decel);
    d.comfortable_decel = j.value("comfortable_decel", d.comfortable_decel);
    d.emergency_decel = j.value("emergency_decel", d.emergency_decel);
    d.precautionary_decel = j.value("precautionary_decel", d.precautionary_decel);
    d.go_accel = j.value("go_accel", d.go_accel);
    d.approach_limit = j.value("approach_limit", d.approach_limit);
    d.circulating_limit = j.value("circulating_limit", d.circulating_limit);
    if (j.contains("decision")) {
        d.decision = parse_decision(j.at("decision").get<std::string>());
    }
    d.use_headway_threshold = j.value("use_headway_threshold", d.use_headway_threshold);
    d.go_headway_threshold = j.value("go_headway_threshold", d.go_headway_threshold);
    d.brake_ramp_time = j.value("brake_ramp_time", d.brake_ramp_time);
    d.budget_floor = j.value("budget_floor", d.budget_floor);
    d.budget_comfort = j.value("budget_comfort", d.budget_comfort);
    d.budget_relax = j.value("budget_relax", d.budget_relax);
    d.keep_clear_margin = j.value("keep_clear_margin", d.keep_clear_margin);
    d.control_gain = j.value("control_gain", d.control_gain);
    d.accel_min = j.value("accel_min", d.accel_min);
    d.accel_max = j.value("accel_max", d.accel_max);
    d.envelope_decel = j.value("envelope_decel", d.envelope_decel);
}

inline void to_json(nlohmann::json& j, const AggressiveParams& p) {
    j = nlohmann::json{{"approach_speed", p.approach_speed},
                       {"medium_creep_speed", p.medium_creep_speed},
                       {"medium_brake_decel", p.medium_brake_decel},
                       {"medium_creep_setback", p.medium_creep_setback},
                       {"medium_clear_offset", p.medium_clear_offset},
                       {"medium_spawn_s", p.medium_spawn_s},
                       {"low_cruise_speed", p.low_cruise_speed},
                       {"low_brake_decel", p.low_brake_decel},
                       {"low_spawn_s", p.low_spawn_s},
                       {"low_clearance_lead", p.low_clearance_lead},
                       {"exit_accel", p.exit_accel},
                       {"medium_headway", p.medium_headway},
                       {"high_headway", p.high_headway},
                       {"resume_clearance", p.resume_clearance}};
}

inline void from_json(const nlohmann::json& j, AggressiveParams& p) {
    p.approach_speed = j.value("approach_speed", p.approach_speed);
    p.medium_creep_speed = j.value("medium_creep_speed", p.medium_creep_speed);
    p.medium_brake_decel = j.value("medium_brake_decel", p.medium_brake_decel);
    p.medium_creep_setback = j.value("medium_creep_setback", p.medium_creep_setback);
    p.medium_clear_offset = j.value("medium_clear_offset", p.medium_clear_offset);
    p.medium_spawn_s = j.value("medium_spawn_s", p.medium_spawn_s);
    p.low_cruise_speed = j.value("low_cruise_speed", p.low_cruise_speed);
    p.low_brake_decel = j.value("low_brake_decel", p.low_brake_decel);
    p.low_spawn_s = j.value("low_spawn_s", p.low_spawn_s);
    p.low_clearance_lead = j.value("low_clearance_lead", p.low_clearance_lead);
    p.exit_accel = j.value("exit_accel", p.exit_accel);
    p.medium_headway = j.value("medium_headway", p.medium_headway);
    p.high_headway = j.value("high_headway", p.high_headway);
    p.resume_clearance = j.value("resume_clearance", p.resume_clearance);
}

}  // namespace rsim::scenario

namespace rsim::geom {

inline void to_json(nlohmann::json& j, const RoundaboutLayout& l) {
    j = nlohmann::json{{"circulating_radius", l.circulating_radius},
                       {"approach_length", l.approach_length},
                       {"exit_length", l.exit_length},
                       {"conflict_arc_fraction", l.conflict_arc_fraction},
                       {"aggressive_spawn_distance", l.aggressive_spawn_distance},
                       {"aggressive_overrun", l.aggressive_overrun},
                       {"yield_line_setback", l.yield_line_setback}};
}

inline void from_json(const nlohmann::json& j, RoundaboutLayout& l) {
    l.circulating_radius = j.value("circulating_radius", l.circulating_radius);
    l.approach_length = j.value("approach_length", l.approach_length);
    l.exit_length = j.value("exit_length", l.exit_length);
    l.conflict_arc_fraction = j.value("conflict_arc_fraction", l.conflict_arc_fraction);
    l.aggressive_spawn_distance =
        j.value("aggressive_spawn_distance", l.aggressive_spawn_distance);
    l.aggressive_overrun = j.value("aggressive_overrun", l.aggressive_overrun);
    l.yield_line_setback = j.value("yield_line_setback", l.yield_line_setback);
}

}  // namespace rsim::geom

namespace rsim::warning {

inline void to_json(nlohmann::json& j, const PredictionConfig& c) {
    j = nlohmann::json{{"horizon", c.horizon},
                       {"coarse_step", c.coarse_step},
                       {"refine_tol", c.refine_tol}};
}

inline void from_json(const nlohmann::json& j, PredictionConfig& c) {
    c.horizon = j.value("horizon", c.horizon);
    c.coarse_step = j.value("coarse_step", c.coarse_step);
    c.refine_tol = j.value("refine_tol", c.refine_tol);
}

}  // namespace rsim::warning

namespace rsim::scenario {

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
    j = nlohmann::json{{"schema_version", c.schema_version},
                       {"dt", c.dt},
                       {"timeout", c.timeout},
                       {"seed", c.seed},
                       {"repeats", c.repeats},
                       {"jitter_std", c.jitter_std},
                       {"ego_radius", c.ego_radius},
                       {"aggressive_radius", c.aggressive_radius},
                       {"layout", c.layout},
                       {"driver", c.driver},
                       {"aggressive", c.aggressive},
                       {"prediction", c.prediction}};
}

inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
    if (!j.contains("schema_version")) {
        throw DataError("ScenarioConfig: missing schema_version");
    }
    c.schema_version = j.at("schema_version").get<int>();
    c.dt = j.value("dt", c.dt);
    c.timeout = j.value("timeout", c.timeout);
    c.seed = j.value("seed", c.seed);
    c.repeats = j.value("repeats", c.repeats);
    c.jitter_std = j.value("jitter_std", c.jitter_std);
    c.ego_radius = j.value("ego_radius", c.ego_radius);
    c.aggressive_radius = j.value("aggressive_radius", c.aggressive_radius);
    if (j.contains("layout")) {
        j.at("layout").get_to(c.layout);
    }
    if (j.contains("driver")) {
        j.at("driver").get_to(c.driver);
    }
    if (j.contains("aggressive")) {
        j.at("aggressive").get_to(c.aggressive);
    }
    if (j.contains("prediction")) {
        j.at("prediction").get_to(c.prediction);
    }
    c.validate();
}

}  // namespace rsim::scenario
