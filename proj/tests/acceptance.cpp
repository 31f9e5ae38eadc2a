// Acceptance gate for the roundabout warning toolkit.
//
// Each check below verifies one guaranteed behavior of the library or the
// command-line tool, end to end, and prints exactly one [PASS]/[FAIL] line.
// The process exits nonzero if any check fails, so this binary doubles as a
// release gate under ctest.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "json.hpp"
#include "rsim/rsim.hpp"

namespace fs = std::filesystem;
using namespace rsim;

namespace {

struct CheckContext {
    std::ostringstream detail;
    bool ok = true;

    void require(bool cond, const std::string& why) {
        if (!cond && ok) {
            detail.str("");
            detail << why;
            ok = false;
        }
    }
};

// ---------------------------------------------------------------------------
// 1. Braking response to warning lead: severity ordering and calibration
// ---------------------------------------------------------------------------

bool check_braking_ordering(CheckContext& c) {
    const auto t_start = std::chrono::steady_clock::now();
    scenario::ScenarioConfig cfg;
    cfg.dt = 0.01;  // fine grid so braking durations are well resolved
    cfg.repeats = 1;

    constexpr std::array<double, 3> anchors = {10.5, 9.8, 7.8};  // none, 1s, 2s
    std::array<double, 3> mean_dec{};
    std::array<double, 3> mean_dur{};
    const int n_seeds = 50;
    int ordering_failures = 0;
    for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
        cfg.seed = seed;
        Rng rng(derive_seed(seed, 1));
        const scenario::DriverModel driver =
            scenario::jitter_driver(cfg.driver, cfg.jitter_std, rng);
        std::array<double, 3> dec{};
        std::array<double, 3> dur{};
        for (std::size_t w = 0; w < kAllWarningLevels.size(); ++w) {
            const auto trial =
                scenario::simulate_trial(cfg, Aggressiveness::High, kAllWarningLevels[w], driver);
            const ssm::SafetyReport rep = scenario::trial_safety_report(cfg, trial);
            dec[w] = std::fabs(rep.max_decel);
            dur[w] = rep.braking_duration;
            mean_dec[w] += dec[w] / n_seeds;
            mean_dur[w] += dur[w] / n_seeds;
        }
        const bool ordered = dec[0] > dec[1] && dec[1] > dec[2] &&  // severity falls with lead
                             dur[0] < dur[1] && dur[1] < dur[2];    // duration grows with lead
        if (!ordered) ++ordering_failures;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    c.require(ordering_failures == 0, std::to_string(ordering_failures) +
                                          " of 50 seeds broke the deceleration/duration ordering");
    for (std::size_t w = 0; w < 3; ++w) {
        c.require(std::fabs(mean_dec[w] - anchors[w]) <= 0.15 * anchors[w],
                  "mean peak deceleration " + format_double(mean_dec[w]) +
                      " m/s^2 is outside 15% of the " + format_double(anchors[w]) +
                      " m/s^2 anchor");
    }
    c.require(elapsed < 10.0,
              "sweep took " + format_double(elapsed) + " s, budget is 10 s");
    if (c.ok) {
        c.detail << "peak decel " << format_double(mean_dec[0]) << "/" << format_double(mean_dec[1])
                 << "/" << format_double(mean_dec[2]) << " m/s^2, durations "
                 << format_double(mean_dur[0]) << "/" << format_double(mean_dur[1]) << "/"
                 << format_double(mean_dur[2]) << " s, 50 seeds in " << format_double(elapsed)
                 << " s";
    }
    return c.ok;
}

// ---------------------------------------------------------------------------
// 2. Earlier warnings raise the TTC floor and cut crash potential
// ---------------------------------------------------------------------------

bool check_warning_effect_direction(CheckContext& c) {
    scenario::ScenarioConfig cfg;
    cfg.repeats = 1;
    std::array<std::vector<double>, 3> ttc;
    std::array<std::vector<double>, 3> cpi;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        cfg.seed = seed;
        const auto design = scenario::run_design(cfg, 1);
        for (const auto& trial : design.trials) {
            const ssm::SafetyReport rep = scenario::trial_safety_report(cfg, trial);
            const auto w = static_cast<std::size_t>(trial.warning);
            if (rep.has_min_ttc) ttc[w].push_back(rep.min_ttc);
            cpi[w].push_back(rep.cpi);
        }
    }
    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (const double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double ttc_none = mean(ttc[0]);
    const double ttc_one = mean(ttc[1]);
    const double ttc_two = mean(ttc[2]);
    const double cpi_none = mean(cpi[0]);
    const double cpi_one = mean(cpi[1]);
    const double cpi_two = mean(cpi[2]);

    c.require(ttc_two > ttc_none, "two-second warning did not raise the mean minimum TTC (" +
                                      format_double(ttc_two) + " vs " + format_double(ttc_none) +
                                      ")");
    c.require(cpi_none > cpi_one && cpi_none > cpi_two,
              "unwarned trials do not carry the highest mean crash potential");
    const stats::WelchResult w_ttc = stats::welch_t(ttc[2], ttc[0]);
    const stats::WelchResult w_cpi1 = stats::welch_t(cpi[0], cpi[1]);
    const stats::WelchResult w_cpi2 = stats::welch_t(cpi[0], cpi[2]);
    c.require(w_ttc.p < 0.05, "TTC shift is not significant (p = " + format_double(w_ttc.p) + ")");
    c.require(w_cpi1.p < 0.05 && w_cpi2.p < 0.05,
              "crash-potential reduction is not significant (p = " + format_double(w_cpi1.p) +
                  ", " + format_double(w_cpi2.p) + ")");
    if (c.ok) {
        c.detail << "mean TTC " << format_double(ttc_none) << "/" << format_double(ttc_one)
                 << "/" << format_double(ttc_two) << " s, mean CPI " << format_double(cpi_none)
                 << "/" << format_double(cpi_one) << "/" << format_double(cpi_two)
                 << ", worst p = "
                 << format_double(std::max({w_ttc.p, w_cpi1.p, w_cpi2.p}));
    }
    return c.ok;
}

// ---------------------------------------------------------------------------
// 3. Unit suites for the individual measures (exact and oracle tolerances)
// ---------------------------------------------------------------------------

int run_silenced(const std::string& cmd, const fs::path& log) {
    const std::string full = cmd + " > " + log.string() + " 2>&1";
    const int status = std::system(full.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool check_unit_suites(CheckContext& c) {
    const fs::path work = fs::temp_directory_path() / "roundsim_acceptance";
    fs::create_directories(work);
    const std::vector<std::pair<std::string, std::string>> suites = {
        {"trajectory", TEST_TRAJECTORY_PATH}, {"ssm", TEST_SSM_PATH},
        {"gaze", TEST_GAZE_PATH},             {"warning", TEST_WARNING_PATH},
        {"stats", TEST_STATS_PATH},
    };
    std::size_t passed = 0;
    for (const auto& [name, path] : suites) {
        const int rc = run_silenced(path, work / ("suite_" + name + ".log"));
        c.require(rc == 0, "unit suite '" + name + "' failed (exit " + std::to_string(rc) +
                               ", log in " + (work / ("suite_" + name + ".log")).string() + ")");
        if (rc == 0) ++passed;
    }
    if (c.ok) c.detail << passed << " measure suites green";
    return c.ok;
}

// ---------------------------------------------------------------------------
// 4. Crash potential index stays in [0, 1] and grows with demanded braking
// ---------------------------------------------------------------------------

bool check_cpi_properties(CheckContext& c) {
    Rng rng(0xC91);
    const ssm::VehicleSpec spec;
    double worst_low = 1.0;
    double worst_high = 0.0;
    for (int trial = 0; trial < 10000 && c.ok; ++trial) {
        const std::size_t n = 20 + static_cast<std::size_t>(rng.uniform() * 80.0);
        const double dt = 0.02 + 0.1 * rng.uniform();
        std::vector<ssm::DracSample> base;
        base.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            ssm::DracSample s;
            s.t = dt * static_cast<double>(k);
            // mixture: ~30% idle samples, the rest exponential-ish demand
            s.drac = rng.uniform() < 0.3 ? 0.0 : -4.0 * std::log(1.0 - rng.uniform());
            base.push_back(s);
        }
        const double t_e = 0.0;
        const double t_f = dt * static_cast<double>(n - 1);
        const double v = ssm::cpi(base, spec, t_e, t_f, dt);
        c.require(v >= 0.0 && v <= 1.0,
                  "crash potential " + format_double(v) + " escaped [0, 1]");
        worst_low = std::min(worst_low, v);
        worst_high = std::max(worst_high, v);

        std::vector<ssm::DracSample> raised = base;
        for (auto& s : raised) s.drac += 2.0 * rng.uniform();
        const double v2 = ssm::cpi(raised, spec, t_e, t_f, dt);
        c.require(v2 + 1e-12 >= v, "raising every braking demand lowered the index (" +
                                       format_double(v) + " -> " + format_double(v2) + ")");
        c.require(v2 >= 0.0 && v2 <= 1.0,
                  "crash potential " + format_double(v2) + " escaped [0, 1]");
    }
    if (c.ok) {
        c.detail << "10000 random series, observed range [" << format_double(worst_low) << ", "
                 << format_double(worst_high) << "], monotone under uniform demand increases";
    }
    return c.ok;
}

// ---------------------------------------------------------------------------
// 5. Offline smoothing beats raw noisy tracks and is exact on clean ones
// ---------------------------------------------------------------------------

Trajectory cv_truth(std::size_t n, double v, double heading, double x0 = 0.0, double y0 = 0.0) {
    Trajectory traj;
    traj.vehicle_id = "cv";
    traj.dt = 0.1;
    for (std::size_t k = 0; k < n; ++k) {
        TrajectoryPoint p;
        p.t = 0.1 * static_cast<double>(k);
        p.x = x0 + v * std::cos(heading) * p.t;
        p.y = y0 + v * std::sin(heading) * p.t;
        p.v = v;
        p.a = 0.0;
        p.heading = heading;
        traj.points.push_back(p);
    }
    return traj;
}

bool check_smoothing(CheckContext& c) {
    // Exactness on a noiseless constant-velocity track (after a short burn-in
    // while the covariance settles).
    const Trajectory clean = cv_truth(200, 10.0, 0.6, 5.0, -8.0);
    const Trajectory sm_clean = kalman_smooth(clean);
    double sup = 0.0;
    for (std::size_t k = 5; k < clean.points.size(); ++k) {
        sup = std::max(sup, std::hypot(sm_clean.points[k].x - clean.points[k].x,
                                       sm_clean.points[k].y - clean.points[k].y));
    }
    c.require(sup < 1e-4, "noiseless position error " + format_double(sup) + " exceeds 1e-4");

    // Monte-Carlo improvement on sigma = 0.5 m position noise.
    const Trajectory truth = cv_truth(200, 10.0, 0.35);
    double raw_sum = 0.0;
    double smooth_sum = 0.0;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(derive_seed(909, seed));
        Trajectory noisy = truth;
        for (auto& p : noisy.points) {
            p.x += 0.5 * rng.normal();
            p.y += 0.5 * rng.normal();
        }
        const Trajectory sm = kalman_smooth(noisy);
        double raw_se = 0.0;
        double smooth_se = 0.0;
        for (std::size_t k = 0; k < truth.points.size(); ++k) {
            const auto& tp = truth.points[k];
            raw_se += std::pow(noisy.points[k].x - tp.x, 2) + std::pow(noisy.points[k].y - tp.y, 2);
            smooth_se += std::pow(sm.points[k].x - tp.x, 2) + std::pow(sm.points[k].y - tp.y, 2);
        }
        const double raw_rmse = std::sqrt(raw_se / truth.points.size());
        const double smooth_rmse = std::sqrt(smooth_se / truth.points.size());
        raw_sum += raw_rmse;
        smooth_sum += smooth_rmse;
        wins += smooth_rmse < raw_rmse ? 1 : 0;
    }
    const double ratio = smooth_sum / raw_sum;
    c.require(ratio < 0.7, "smoothed/raw RMSE ratio " + format_double(ratio) + " is not < 0.7");
    if (c.ok) {
        c.detail << "RMSE ratio " << format_double(ratio) << " over 100 noisy tracks (" << wins
                 << " improved), clean-track error " << format_double(sup);
    }
    return c.ok;
}

// ---------------------------------------------------------------------------
// 6. Stop/go classifiers clear the benchmark and degenerate consistently
// ---------------------------------------------------------------------------

bool check_classifiers(CheckContext& c) {
    const intent::Dataset base = intent::make_synthetic_dataset(3);
    std::size_t go = 0;
    for (const auto& r : base.rows) go += r.label == intent::Label::Go ? 1 : 0;
    c.require(base.rows.size() == 288,
              "benchmark has " + std::to_string(base.rows.size()) + " rows, expected 288");
    c.require(go == 71, "benchmark has " + std::to_string(go) + " go rows, expected 71");

    const intent::TrainParams params;
    std::map<intent::ModelKind, double> acc;
    for (const auto kind : intent::kAllModelKinds) {
        const intent::FittedModel model = intent::train(base, kind, params);
        acc[kind] = intent::evaluate(model, base).test_accuracy;
        c.require(acc[kind] >= 0.85, std::string(intent::model_kind_name(kind)) +
                                         " test accuracy " + format_double(acc[kind]) +
                                         " is below 0.85");
    }

    const intent::Dataset hard = intent::make_synthetic_dataset_nonlinear(3);
    std::map<intent::ModelKind, double> hard_acc;
    for (const auto kind : intent::kAllModelKinds) {
        const intent::FittedModel model = intent::train(hard, kind, params);
        hard_acc[kind] = intent::evaluate(model, hard).test_accuracy;
    }
    for (const auto kind : intent::kAllModelKinds) {
        c.require(hard_acc[intent::ModelKind::GradientBoosting] >= hard_acc[kind],
                  std::string("boosting (") +
                      format_double(hard_acc[intent::ModelKind::GradientBoosting]) +
                      ") trails " + intent::model_kind_name(kind) + " (" +
                      format_double(hard_acc[kind]) + ") on the interaction benchmark");
    }

    // A single unbagged tree grown on all features must equal the plain tree.
    intent::TrainParams degenerate = params;
    degenerate.forest.n_trees = 1;
    degenerate.forest.bootstrap = false;
    degenerate.forest.mtry = 0;
    for (const intent::Dataset* ds : {&base, &hard}) {
        const intent::FittedModel forest =
            intent::train(*ds, intent::ModelKind::RandomForest, degenerate);
        const intent::FittedModel tree = intent::train(*ds, intent::ModelKind::DecisionTree, params);
        for (const auto& row : ds->rows) {
            if (forest.predict(row) != tree.predict(row)) {
                c.require(false, "single-tree forest disagreed with the decision tree");
                break;
            }
        }
        if (!c.ok) break;
    }
    if (c.ok) {
        c.detail << "accuracies knn/tree/forest/boosting "
                 << format_double(acc[intent::ModelKind::KNN]) << "/"
                 << format_double(acc[intent::ModelKind::DecisionTree]) << "/"
                 << format_double(acc[intent::ModelKind::RandomForest]) << "/"
                 << format_double(acc[intent::ModelKind::GradientBoosting])
                 << ", boosting tops the interaction benchmark at "
                 << format_double(hard_acc[intent::ModelKind::GradientBoosting]);
    }
    return c.ok;
}

// ---------------------------------------------------------------------------
// 7. Statistics kernels match their closed-form oracles
// ---------------------------------------------------------------------------

bool check_statistics(CheckContext& c) {
    Rng rng(0x57A7);
    std::vector<stats::FactorialSample> samples;
    for (int s = 0; s < 4; ++s) {
        for (const auto w : kAllWarningLevels) {
            for (const auto a : kAllAggressiveness) {
                stats::FactorialSample f;
                f.subject_id = s;
                f.warning = w;
                f.aggressiveness = a;
                f.value = 5.0 + rng.normal();
                samples.push_back(f);
            }
        }
    }
    const stats::AnovaResult r = stats::rm_anova(samples);
    c.require(r.warning.df == 2 && r.aggressiveness.df == 2 && r.interaction.df == 4,
              "effect degrees of freedom are (" + std::to_string(r.warning.df) + ", " +
                  std::to_string(r.aggressiveness.df) + ", " + std::to_string(r.interaction.df) +
                  "), expected (2, 2, 4)");

    const double p = stats::f_upper_tail(5.341, 2, 70);
    c.require(p >= 0.006 && p <= 0.008,
              "F(2, 70) upper tail at 5.341 is " + format_double(p) +
                  ", expected within [0.006, 0.008]");

    const std::vector<double> lo = {1.0, 2.0, 3.0, 2.5, 1.5};
    const std::vector<double> hi = {5.0, 6.0, 7.0, 6.5, 5.5};
    const stats::WelchResult w = stats::welch_t(lo, hi);
    c.require(w.t < 0.0, "t statistic should be negative when the first mean is smaller, got " +
                             format_double(w.t));
    if (c.ok) {
        c.detail << "df (2, 2, 4), F tail p = " << format_double(p)
                 << ", Welch t = " << format_double(w.t);
    }
    return c.ok;
}

// ---------------------------------------------------------------------------
// 8. The command-line pipeline replays byte for byte at any worker count
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

bool trees_identical(const fs::path& a, const fs::path& b, std::string& why) {
    std::map<fs::path, fs::path> files_a;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (e.is_regular_file()) files_a[fs::relative(e.path(), a)] = e.path();
    }
    std::size_t count_b = 0;
    for (const auto& e : fs::recursive_directory_iterator(b)) {
        if (!e.is_regular_file()) continue;
        ++count_b;
        const fs::path rel = fs::relative(e.path(), b);
        const auto it = files_a.find(rel);
        if (it == files_a.end()) {
            why = "extra file " + rel.string();
            return false;
        }
        if (slurp(it->second) != slurp(e.path())) {
            why = "file " + rel.string() + " differs";
            return false;
        }
    }
    if (count_b != files_a.size()) {
        why = "file counts differ";
        return false;
    }
    return true;
}

bool check_replayability(CheckContext& c) {
    const fs::path work = fs::temp_directory_path() / "roundsim_acceptance" / "replay";
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path cfg = work / "config.json";
    std::ofstream(cfg) << "{\"schema_version\": 1, \"seed\": 2024, \"repeats\": 2}\n";

    const std::string tool = ROUNDSIM_PATH;
    const auto simulate = [&](const std::string& tag, int jobs) {
        const fs::path out = work / tag;
        return run_silenced(tool + " simulate --config " + cfg.string() + " --out " +
                                out.string() + " --jobs " + std::to_string(jobs),
                            work / (tag + ".log"));
    };
    c.require(simulate("run_a", 1) == 0, "first simulate run failed");
    c.require(simulate("run_b", 1) == 0, "second simulate run failed");
    c.require(simulate("run_jobs8", 8) == 0, "parallel simulate run failed");
    if (!c.ok) return false;

    std::string why;
    c.require(trees_identical(work / "run_a", work / "run_b", why),
              "repeated run is not byte-identical: " + why);
    c.require(trees_identical(work / "run_a", work / "run_jobs8", why),
              "eight-worker run is not byte-identical: " + why);

    for (const std::string tag : {"a", "b"}) {
        const fs::path met = work / ("metrics_" + tag + ".csv");
        const fs::path anova = work / ("anova_" + tag + ".csv");
        c.require(run_silenced(tool + " metrics --trials " + (work / ("run_" + tag)).string() +
                                   " --out " + met.string(),
                               work / ("metrics_" + tag + ".log")) == 0,
                  "metrics run " + tag + " failed");
        c.require(run_silenced(tool + " stats --metrics " + met.string() +
                                   " --metric cpi --out " + anova.string(),
                               work / ("anova_" + tag + ".log")) == 0,
                  "stats run " + tag + " failed");
    }
    if (!c.ok) return false;
    c.require(slurp(work / "metrics_a.csv") == slurp(work / "metrics_b.csv"),
              "metrics tables differ between identical runs");
    c.require(slurp(work / "anova_a.csv") == slurp(work / "anova_b.csv"),
              "ANOVA tables differ between identical runs");
    if (c.ok) {
        c.detail << "simulate/metrics/stats reran byte-identically; 8 workers match 1";
    }
    return c.ok;
}

bool run_check(const std::string& label, const std::function<bool(CheckContext&)>& fn) {
    CheckContext c;
    bool ok = false;
    try {
        ok = fn(c);
    } catch (const std::exception& e) {
        c.detail.str("");
        c.detail << "unexpected exception: " << e.what();
        ok = false;
    }
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << label;
    const std::string detail = c.detail.str();
    if (!detail.empty()) std::cout << " - " << detail;
    std::cout << "\n";
    return ok;
}

}  // namespace

int main() {
    int failures = 0;
    failures += !run_check("warned drivers brake softer and longer, near calibrated rates",
                           check_braking_ordering);
    failures += !run_check("earlier warnings raise minimum TTC and cut crash potential",
                           check_warning_effect_direction);
    failures += !run_check("measure unit suites (exact values and oracle tolerances)",
                           check_unit_suites);
    failures += !run_check("crash potential index is bounded and monotone", check_cpi_properties);
    failures += !run_check("offline smoothing beats raw noisy tracks, exact when clean",
                           check_smoothing);
    failures += !run_check("stop/go classifiers clear the synthetic benchmark",
                           check_classifiers);
    failures += !run_check("statistics kernels match closed-form oracles", check_statistics);
    failures += !run_check("command-line pipeline replays byte for byte", check_replayability);
    if (failures == 0) {
        std::cout << "all acceptance checks passed\n";
        return 0;
    }
    std::cout << failures << " acceptance check(s) failed\n";
    return 1;
}
