#pragma once
// Stop-or-go intent prediction at warning onset.
//
// Builds six-feature vectors from simulated trials (kinematics at the warning
// instant plus gaze statistics over the entry-to-warning window), screens them
// for collinearity with a Pearson matrix, and trains/evaluates four
// from-scratch classifiers: k-nearest neighbors, a CART decision tree, a
// bagged random forest, and logistic-loss gradient-boosted trees.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rsim/common.hpp"
#include "rsim/csv.hpp"
#include "rsim/gaze.hpp"
#include "rsim/scenario.hpp"
#include "rsim/ssm.hpp"

namespace rsim::intent {

// ---------------------------------------------------------------------------
// Feature vectors and datasets
// ---------------------------------------------------------------------------

enum class Label { Stop, Go };

inline const char* label_name(Label l) { return l == Label::Go ? "Go" : "Stop"; }

inline Label parse_label(const std::string& s) {
    if (s == "Go") return Label::Go;
    if (s == "Stop") return Label::Stop;
    throw DataError("unknown label '" + s + "' (expected Stop or Go)");
}

inline constexpr int kNumFeatures = 6;
inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "v_i", "h_t", "an", "drac", "mfd_road", "pd_bar"};

/// One training row: kinematic state at the warning instant (v_i, h_t, drac),
/// window statistics from roundabout entry to the warning (an, mfd_road,
/// pd_bar), and the driver's stop-or-go outcome.
struct FeatureVector {
    double v_i = 0.0;       // ego speed at warning onset, m/s
    double h_t = 0.0;       // arrival-time gap at the conflict point, s
                            // (positive: the intruder gets there first)
    double an = 0.0;        // acceleration noise over [entry, onset], m/s^2
    double drac = 0.0;      // required avoidance deceleration at onset, m/s^2
    double mfd_road = 0.0;  // mean fixation duration on the road, s
    double pd_bar = 0.0;    // average pupil diameter, px
    Label label = Label::Stop;

    std::array<double, kNumFeatures> features() const {
        return {v_i, h_t, an, drac, mfd_road, pd_bar};
    }

    void validate() const {
        const auto f = features();
        for (int i = 0; i < kNumFeatures; ++i) {
            if (!std::isfinite(f[i])) {
                throw DataError(std::string("FeatureVector: ") + kFeatureNames[i] +
                                " is not finite");
            }
        }
        if (an < 0.0 || drac < 0.0 || mfd_road < 0.0 || pd_bar < 0.0) {
            throw DataError("FeatureVector: an, drac, mfd_road, pd_bar must be >= 0");
        }
    }
};

struct Dataset {
    std::vector<FeatureVector> rows;
    std::uint64_t split_seed = 0;
};

inline constexpr const char* kDatasetCsvHeader = "v_i,h_t,an,drac,mfd_road,pd_bar,label";

inline std::string dataset_to_csv(const Dataset& ds) {
    std::ostringstream out;
    out << kDatasetCsvHeader << '\n';
    for (const auto& r : ds.rows) {
        out << format_double(r.v_i) << ',' << format_double(r.h_t) << ','
            << format_double(r.an) << ',' << format_double(r.drac) << ','
            << format_double(r.mfd_road) << ',' << format_double(r.pd_bar) << ','
            << label_name(r.label) << '\n';
    }
    return out.str();
}

inline Dataset ingest_dataset_csv(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    csv::require_columns(t, {"v_i", "h_t", "an", "drac", "mfd_road", "pd_bar", "label"},
                         "dataset '" + path + "'");
    Dataset ds;
    ds.rows.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t ln = t.line_numbers[i];
        if (row.size() != 7) {
            throw ParseError("line " + std::to_string(ln) + ": expected 7 cells, got " +
                             std::to_string(row.size()));
        }
        FeatureVector fv;
        fv.v_i = csv::parse_double(row[0], ln, "v_i");
        fv.h_t = csv::parse_double(row[1], ln, "h_t");
        fv.an = csv::parse_double(row[2], ln, "an");
        fv.drac = csv::parse_double(row[3], ln, "drac");
        fv.mfd_road = csv::parse_double(row[4], ln, "mfd_road");
        fv.pd_bar = csv::parse_double(row[5], ln, "pd_bar");
        fv.label = parse_label(row[6]);
        fv.validate();
        ds.rows.push_back(fv);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Feature extraction from simulated trials
// ---------------------------------------------------------------------------

/// Why a trial contributed no training row. Only warned trials have an onset;
/// rows with incomplete gaze or a degenerate observation window are dropped
/// rather than imputed.
enum class Exclusion { NoWarning, MissingGaze, DegenerateWindow, UndefinedKinematics };

inline const char* exclusion_name(Exclusion e) {
    switch (e) {
        case Exclusion::NoWarning: return "no_warning";
        case Exclusion::MissingGaze: return "missing_gaze";
        case Exclusion::DegenerateWindow: return "degenerate_window";
        case Exclusion::UndefinedKinematics: return "undefined_kinematics";
    }
    return "?";
}

struct Extraction {
    std::optional<FeatureVector> vec;
    std::optional<Exclusion> reason;  // set iff vec is empty
};

namespace detail {

inline std::optional<std::size_t> sample_index(const Trajectory& traj, double t) {
    if (traj.points.empty()) return std::nullopt;
    const double t0 = traj.points.front().t;
    const long i = std::lround((t - t0) / traj.dt);
    if (i < 0 || i >= static_cast<long>(traj.points.size())) return std::nullopt;
    if (std::abs(traj.points[static_cast<std::size_t>(i)].t - t) > 0.5 * traj.dt) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(i);
}

}  // namespace detail

/// Builds one feature vector from a completed trial. `log` may be null when
/// no gaze recording exists for the trial; such trials are excluded.
inline Extraction extract_features(const scenario::ScenarioConfig& cfg,
                                   const scenario::TrialResult& trial,
                                   const gaze::GazeLog* log) {
    if (!trial.warning_event.has_value()) {
        return {std::nullopt, Exclusion::NoWarning};
    }
    const double t_issue = trial.warning_event->t_issue;
    const double t_entry = trial.t_ego_entry;
    if (!(t_issue > t_entry)) {
        return {std::nullopt, Exclusion::DegenerateWindow};
    }

    const auto ei = detail::sample_index(trial.ego, t_issue);
    const auto ai = detail::sample_index(trial.aggressive, t_issue);
    if (!ei || !ai) {
        return {std::nullopt, Exclusion::UndefinedKinematics};
    }
    const TrajectoryPoint& ego = trial.ego.points[*ei];
    const TrajectoryPoint& agg = trial.aggressive.points[*ai];

    const geom::PathGeometry g = geom::make_roundabout_geometry(cfg.layout);
    const double d_ego = g.conflict_s_ego - trial.ego_s[*ei];
    const double d_agg = g.conflict_s_agg - trial.aggressive_s[*ai];

    FeatureVector fv;
    fv.v_i = ego.v;

    // Arrival-time gap at the conflict point, positive when the intruder
    // arrives first (the configuration the warned driver must resolve).
    const auto h = ssm::time_headway(d_agg, agg.v, d_ego, ego.v);
    if (!h.has_value()) {
        return {std::nullopt, Exclusion::UndefinedKinematics};
    }
    fv.h_t = *h;

    // Required avoidance deceleration from the instantaneous closing problem,
    // mirroring the safety-report series.
    const auto k =
        ssm::detail::pair_kinematics(ego, agg, cfg.ego_radius, cfg.aggressive_radius);
    if (k.closing_sum > 0.0) {
        if (!(k.net_gap > 0.0)) {
            return {std::nullopt, Exclusion::UndefinedKinematics};
        }
        fv.drac = k.closing_sum * k.closing_sum / (2.0 * k.net_gap);
    }

    std::vector<ssm::AccelSample> accels;
    for (std::size_t i = 0; i < trial.ego.points.size(); ++i) {
        const auto& p = trial.ego.points[i];
        if (p.t >= t_entry - 1e-9 && p.t <= t_issue + 1e-9) {
            accels.push_back({p.t, p.a});
        }
    }
    if (accels.size() < 2) {
        return {std::nullopt, Exclusion::DegenerateWindow};
    }
    fv.an = ssm::acceleration_noise(accels, t_entry, t_issue, trial.ego.dt);

    if (log == nullptr) {
        return {std::nullopt, Exclusion::MissingGaze};
    }
    const auto road = gaze::fixation_features(*log, t_entry, t_issue, gaze::Aoi::RoadAhead);
    fv.mfd_road = road.any ? road.mean_duration : 0.0;
    try {
        fv.pd_bar = gaze::mean_pupil_diameter(*log, t_entry, t_issue);
    } catch (const DataError&) {
        return {std::nullopt, Exclusion::MissingGaze};
    }

    fv.label = trial.decision == Decision::Go ? Label::Go : Label::Stop;
    fv.validate();
    return {fv, std::nullopt};
}

/// Seeded surrogate eye-tracking log spanning [t0, t1]: alternating fixations
/// mostly on the road ahead with occasional glances at the intruder and the
/// in-vehicle displays, and plausible per-eye pupil diameters.
inline gaze::GazeLog synthetic_trial_gaze(std::uint64_t seed, double t0, double t1) {
    if (!(t1 > t0)) throw DataError("synthetic_trial_gaze: need t1 > t0");
    Rng rng(seed);
    gaze::GazeLog log;
    double t = t0;
    while (t < t1) {
        gaze::FixationRecord r;
        r.t_start = t;
        r.t_end = t + 0.15 + 0.45 * rng.uniform();
        const double u = rng.uniform();
        if (u < 0.55) r.aoi = gaze::Aoi::RoadAhead;
        else if (u < 0.80) r.aoi = gaze::Aoi::AggressiveVehicle;
        else if (u < 0.90) r.aoi = gaze::Aoi::SpeedInfo;
        else r.aoi = gaze::Aoi::WarningInfo;
        const double base = 37.0 + 6.0 * rng.uniform();
        r.pupil_left = base + 0.4 * rng.uniform();
        r.pupil_right = base + 0.4 * rng.uniform();
        log.records.push_back(r);
        t = r.t_end + 0.02 * rng.uniform();
    }
    return log;
}

struct BuildCounts {
    int no_warning = 0;
    int missing_gaze = 0;
    int degenerate_window = 0;
    int undefined_kinematics = 0;
    int total_excluded() const {
        return no_warning + missing_gaze + degenerate_window + undefined_kinematics;
    }
};

struct BuiltDataset {
    Dataset ds;
    BuildCounts excluded;
};

/// Assembles a dataset from a batch of trials, synthesizing one seeded gaze
/// log per trial. Exclusions are tallied, never imputed.
inline BuiltDataset build_dataset(const scenario::ScenarioConfig& cfg,
                                  const std::vector<scenario::TrialResult>& trials,
                                  std::uint64_t gaze_seed) {
    BuiltDataset out;
    out.ds.split_seed = derive_seed(gaze_seed, 0x5EEDULL);
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& trial = trials[i];
        gaze::GazeLog log;
        const gaze::GazeLog* log_ptr = nullptr;
        if (trial.t_end > 0.0) {
            log = synthetic_trial_gaze(derive_seed(gaze_seed, i + 1), 0.0, trial.t_end);
            log_ptr = &log;
        }
        const Extraction ex = extract_features(cfg, trial, log_ptr);
        if (ex.vec.has_value()) {
            out.ds.rows.push_back(*ex.vec);
            continue;
        }
        switch (*ex.reason) {
            case Exclusion::NoWarning: ++out.excluded.no_warning; break;
            case Exclusion::MissingGaze: ++out.excluded.missing_gaze; break;
            case Exclusion::DegenerateWindow: ++out.excluded.degenerate_window; break;
            case Exclusion::UndefinedKinematics: ++out.excluded.undefined_kinematics; break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pearson correlation screening
// ---------------------------------------------------------------------------

struct PearsonMatrix {
    std::array<std::array<double, kNumFeatures>, kNumFeatures> r{};
    std::array<bool, kNumFeatures> defined{};  // false: zero-variance feature
};

/// |r| banding used in collinearity reports.
inline const char* correlation_band(double r) {
    const double a = std::abs(r);
    if (a < 0.3) return "negligible";
    if (a < 0.5) return "low";
    if (a < 0.7) return "moderate";
    return "high";
}

inline PearsonMatrix pearson_matrix(const Dataset& ds) {
    const std::size_t n = ds.rows.size();
    if (n < 3) throw DataError("pearson_matrix: need at least 3 rows");
    PearsonMatrix out;

    std::array<std::vector<double>, kNumFeatures> cols;
    for (auto& c : cols) c.reserve(n);
    for (const auto& row : ds.rows) {
        const auto f = row.features();
        for (int j = 0; j < kNumFeatures; ++j) cols[j].push_back(f[j]);
    }

    std::array<double, kNumFeatures> mean{};
    for (int j = 0; j < kNumFeatures; ++j) {
        mean[j] = std::accumulate(cols[j].begin(), cols[j].end(), 0.0) / double(n);
        const auto [lo, hi] = std::minmax_element(cols[j].begin(), cols[j].end());
        out.defined[j] = (*hi > *lo);  // a constant column has no correlation
    }

    std::array<std::array<double, kNumFeatures>, kNumFeatures> s{};
    for (std::size_t k = 0; k < n; ++k) {
        for (int i = 0; i < kNumFeatures; ++i) {
            const double di = cols[i][k] - mean[i];
            for (int j = i; j < kNumFeatures; ++j) {
                s[i][j] += di * (cols[j][k] - mean[j]);
            }
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < kNumFeatures; ++i) {
        for (int j = 0; j < kNumFeatures; ++j) {
            if (i == j) {
                out.r[i][j] = 1.0;
                continue;
            }
            if (!out.defined[i] || !out.defined[j]) {
                out.r[i][j] = nan;
                continue;
            }
            const double sij = i < j ? s[i][j] : s[j][i];
            double rij = sij / std::sqrt(s[i][i] * s[j][j]);
            rij = std::clamp(rij, -1.0, 1.0);  // guard rounding at |r| = 1
            out.r[i][j] = rij;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stratified splitting and standardization
// ---------------------------------------------------------------------------

struct SplitIndices {
    std::vector<int> train;
    std::vector<int> test;
};

/// Deterministic 80/20 (by default) stratified split keyed on
/// Dataset::split_seed. Each class contributes at least one row to both
/// sides; fewer than two rows in a class is a stratification error.
inline SplitIndices stratified_split(const Dataset& ds, double test_fraction = 0.2) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw DataError("stratified_split: test_fraction must be in (0, 1)");
    }
    std::array<std::vector<int>, 2> by_class;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        by_class[ds.rows[i].label == Label::Go ? 1 : 0].push_back(static_cast<int>(i));
    }
    for (const auto& cls : by_class) {
        if (cls.size() < 2) {
            throw DataError("stratified_split: every class needs at least 2 rows "
                            "so neither split is left without it");
        }
    }
    SplitIndices out;
    for (int c = 0; c < 2; ++c) {
        auto idx = by_class[c];
        Rng rng(derive_seed(ds.split_seed, static_cast<std::uint64_t>(c) + 17));
        for (std::size_t i = idx.size(); i > 1; --i) {  // Fisher-Yates
            const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
            std::swap(idx[i - 1], idx[j]);
        }
        std::size_t n_test = static_cast<std::size_t>(
            std::lround(test_fraction * static_cast<double>(idx.size())));
        n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
        out.test.insert(out.test.end(), idx.begin(), idx.begin() + n_test);
        out.train.insert(out.train.end(), idx.begin() + n_test, idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

/// Per-feature z-score parameters. Fit exclusively on the training split so
/// test statistics never leak into the scaling.
struct Scaler {
    std::array<double, kNumFeatures> mean{};
    std::array<double, kNumFeatures> stdev{};  // population std; 0 mapped to 1

    static Scaler fit(const std::vector<FeatureVector>& rows, const std::vector<int>& idx) {
        if (idx.empty()) throw DataError("Scaler::fit: empty index set");
        Scaler sc;
        for (int i : idx) {
            const auto f = rows[static_cast<std::size_t>(i)].features();
            for (int j = 0; j < kNumFeatures; ++j) sc.mean[j] += f[j];
        }
        for (double& m : sc.mean) m /= static_cast<double>(idx.size());
        for (int i : idx) {
            const auto f = rows[static_cast<std::size_t>(i)].features();
            for (int j = 0; j < kNumFeatures; ++j) {
                const double d = f[j] - sc.mean[j];
                sc.stdev[j] += d * d;
            }
        }
        for (double& v : sc.stdev) {
            v = std::sqrt(v / static_cast<double>(idx.size()));
            if (v == 0.0) v = 1.0;
        }
        return sc;
    }

    std::array<double, kNumFeatures> transform(const FeatureVector& fv) const {
        auto f = fv.features();
        for (int j = 0; j < kNumFeatures; ++j) f[j] = (f[j] - mean[j]) / stdev[j];
        return f;
    }
};

// ---------------------------------------------------------------------------
// K-nearest neighbors
// ---------------------------------------------------------------------------

struct KnnParams {
    int k = 5;
};

class Knn {
  public:
    Knn(const std::vector<FeatureVector>& rows, const std::vector<int>& train_idx,
        KnnParams p)
        : k_(p.k), scaler_(Scaler::fit(rows, train_idx)) {
        if (k_ < 1) throw DataError("Knn: k must be >= 1");
        points_.reserve(train_idx.size());
        labels_.reserve(train_idx.size());
        for (int i : train_idx) {
            points_.push_back(scaler_.transform(rows[static_cast<std::size_t>(i)]));
            labels_.push_back(rows[static_cast<std::size_t>(i)].label);
        }
    }

    /// Fraction of the k nearest training points labeled Go. Distance ties
    /// break on training order for determinism.
    double score(const FeatureVector& fv) const {
        const auto q = scaler_.transform(fv);
        std::vector<std::pair<double, int>> d;
        d.reserve(points_.size());
        for (std::size_t i = 0; i < points_.size(); ++i) {
            double acc = 0.0;
            for (int j = 0; j < kNumFeatures; ++j) {
                const double diff = points_[i][j] - q[j];
                acc += diff * diff;
            }
            d.emplace_back(acc, static_cast<int>(i));
        }
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), d.size());
        std::partial_sort(d.begin(), d.begin() + k, d.end());
        int go = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (labels_[static_cast<std::size_t>(d[i].second)] == Label::Go) ++go;
        }
        return static_cast<double>(go) / static_cast<double>(k);
    }

    Label predict(const FeatureVector& fv) const {
        return score(fv) > 0.5 ? Label::Go : Label::Stop;
    }

    const Scaler& scaler() const { return scaler_; }

  private:
    int k_;
    Scaler scaler_;
    std::vector<std::array<double, kNumFeatures>> points_;
    std::vector<Label> labels_;
};

// ---------------------------------------------------------------------------
// CART decision tree (Gini impurity, binary splits on raw features)
// ---------------------------------------------------------------------------

struct TreeParams {
    int max_depth = 6;
    int min_leaf = 2;
};

namespace detail {

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double objective = std::numeric_limits<double>::infinity();  // lower is better
};

/// Candidate features for one split: all of them, or an mtry-subset sampled
/// without replacement (used by the forest).
inline std::vector<int> candidate_features(int mtry, Rng* rng) {
    std::vector<int> feats(kNumFeatures);
    std::iota(feats.begin(), feats.end(), 0);
    if (mtry <= 0 || mtry >= kNumFeatures || rng == nullptr) return feats;
    for (int i = 0; i < mtry; ++i) {
        const int j = i + static_cast<int>(rng->next_u64() %
                                           static_cast<std::uint64_t>(kNumFeatures - i));
        std::swap(feats[static_cast<std::size_t>(i)], feats[static_cast<std::size_t>(j)]);
    }
    feats.resize(static_cast<std::size_t>(mtry));
    std::sort(feats.begin(), feats.end());  // feature-order tie-breaking stays stable
    return feats;
}

}  // namespace detail

class DecisionTree {
  public:
    DecisionTree() = default;

    /// `mtry` > 0 with a non-null rng samples that many candidate features per
    /// split; otherwise every split considers all six features.
    DecisionTree(const std::vector<FeatureVector>& rows, const std::vector<int>& train_idx,
                 TreeParams p, int mtry = 0, Rng* rng = nullptr)
        : params_(p) {
        if (train_idx.empty()) throw DataError("DecisionTree: empty training set");
        if (p.max_depth < 1 || p.min_leaf < 1) {
            throw DataError("DecisionTree: max_depth and min_leaf must be >= 1");
        }
        std::vector<int> idx = train_idx;
        build(rows, idx, 0, mtry, rng);
    }

    double score(const FeatureVector& fv) const {
        const auto f = fv.features();
        std::size_t node = 0;
        while (!nodes_[node].leaf) {
            node = f[static_cast<std::size_t>(nodes_[node].feature)] <= nodes_[node].threshold
                       ? nodes_[node].left
                       : nodes_[node].right;
        }
        return nodes_[node].p_go;
    }

    Label predict(const FeatureVector& fv) const {
        return score(fv) > 0.5 ? Label::Go : Label::Stop;
    }

    std::size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        bool leaf = true;
        int feature = -1;
        double threshold = 0.0;
        std::size_t left = 0, right = 0;
        double p_go = 0.0;
    };

    static double gini(int go, int n) {
        if (n == 0) return 0.0;
        const double p = static_cast<double>(go) / n;
        return 2.0 * p * (1.0 - p);
    }

    detail::SplitChoice best_split(const std::vector<FeatureVector>& rows,
                                   const std::vector<int>& idx, int mtry, Rng* rng) const {
        const int n = static_cast<int>(idx.size());
        detail::SplitChoice best;
        const auto feats = detail::candidate_features(mtry, rng);
        std::vector<std::pair<double, int>> vals(idx.size());  // (value, isGo)
        for (int f : feats) {
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const auto& row = rows[static_cast<std::size_t>(idx[i])];
                vals[i] = {row.features()[static_cast<std::size_t>(f)],
                           row.label == Label::Go ? 1 : 0};
            }
            std::sort(vals.begin(), vals.end());
            int go_left = 0;
            int total_go = 0;
            for (const auto& v : vals) total_go += v.second;
            for (int i = 0; i + 1 < n; ++i) {
                go_left += vals[static_cast<std::size_t>(i)].second;
                const double a = vals[static_cast<std::size_t>(i)].first;
                const double b = vals[static_cast<std::size_t>(i + 1)].first;
                if (!(b > a)) continue;  // can't separate equal values
                const int n_l = i + 1, n_r = n - n_l;
                if (n_l < params_.min_leaf || n_r < params_.min_leaf) continue;
                const double obj =
                    (n_l * gini(go_left, n_l) + n_r * gini(total_go - go_left, n_r)) / n;
                if (obj < best.objective - 1e-12) {
                    best.found = true;
                    best.feature = f;
                    best.threshold = 0.5 * (a + b);
                    best.objective = obj;
                }
            }
        }
        return best;
    }

    std::size_t build(const std::vector<FeatureVector>& rows, std::vector<int>& idx,
                      int depth, int mtry, Rng* rng) {
        const std::size_t me = nodes_.size();
        nodes_.emplace_back();
        const int n = static_cast<int>(idx.size());
        int go = 0;
        for (int i : idx) {
            if (rows[static_cast<std::size_t>(i)].label == Label::Go) ++go;
        }
        nodes_[me].p_go = static_cast<double>(go) / n;
        const bool pure = (go == 0 || go == n);
        if (depth >= params_.max_depth || n < 2 * params_.min_leaf || pure) {
            return me;
        }
        const auto split = best_split(rows, idx, mtry, rng);
        if (!split.found ||
            split.objective >= gini(go, n) - 1e-12) {  // no impurity reduction
            return me;
        }
        std::vector<int> left, right;
        for (int i : idx) {
            const double v = rows[static_cast<std::size_t>(i)]
                                 .features()[static_cast<std::size_t>(split.feature)];
            (v <= split.threshold ? left : right).push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();
        const std::size_t l = build(rows, left, depth + 1, mtry, rng);
        const std::size_t r = build(rows, right, depth + 1, mtry, rng);
        nodes_[me].leaf = false;
        nodes_[me].feature = split.feature;
        nodes_[me].threshold = split.threshold;
        nodes_[me].left = l;
        nodes_[me].right = r;
        return me;
    }

    TreeParams params_;
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Random forest (bootstrap bagging + per-split feature subsampling)
// ---------------------------------------------------------------------------

struct ForestParams {
    int n_trees = 100;
    bool bootstrap = true;
    int mtry = 2;  // floor(sqrt(6)); 0 disables feature subsampling
    std::uint64_t seed = 0;
    TreeParams tree{};
};

class RandomForest {
  public:
    RandomForest(const std::vector<FeatureVector>& rows, const std::vector<int>& train_idx,
                 ForestParams p)
        : params_(p) {
        if (p.n_trees < 1) throw DataError("RandomForest: n_trees must be >= 1");
        trees_.reserve(static_cast<std::size_t>(p.n_trees));
        for (int b = 0; b < p.n_trees; ++b) {
            Rng rng(derive_seed(p.seed, static_cast<std::uint64_t>(b) + 1));
            std::vector<int> sample;
            if (p.bootstrap) {
                sample.reserve(train_idx.size());
                for (std::size_t i = 0; i < train_idx.size(); ++i) {
                    sample.push_back(train_idx[static_cast<std::size_t>(
                        rng.next_u64() % train_idx.size())]);
                }
            } else {
                sample = train_idx;
            }
            trees_.emplace_back(rows, sample, p.tree, p.mtry, p.mtry > 0 ? &rng : nullptr);
        }
    }

    /// Fraction of trees voting Go.
    double score(const FeatureVector& fv) const {
        int go = 0;
        for (const auto& t : trees_) {
            if (t.predict(fv) == Label::Go) ++go;
        }
        return static_cast<double>(go) / static_cast<double>(trees_.size());
    }

    Label predict(const FeatureVector& fv) const {
        return score(fv) > 0.5 ? Label::Go : Label::Stop;
    }

  private:
    ForestParams params_;
    std::vector<DecisionTree> trees_;
};

// ---------------------------------------------------------------------------
// Gradient-boosted trees on logistic loss
// ---------------------------------------------------------------------------

struct GbtParams {
    int rounds = 100;
    int max_depth = 3;
    double shrinkage = 0.1;
    int min_leaf = 2;
};

namespace detail {

/// Depth-limited regression tree fit on per-row gradients/hessians with
/// Newton leaf weights (gain = sum(g)^2 / (sum(h) + lambda), maximized).
class GradTree {
  public:
    GradTree(const std::vector<std::array<double, kNumFeatures>>& x,
             const std::vector<double>& g, const std::vector<double>& h,
             std::vector<int> idx, int max_depth, int min_leaf) {
        build(x, g, h, idx, 0, max_depth, min_leaf);
    }

    double value(const std::array<double, kNumFeatures>& f) const {
        std::size_t node = 0;
        while (!nodes_[node].leaf) {
            node = f[static_cast<std::size_t>(nodes_[node].feature)] <= nodes_[node].threshold
                       ? nodes_[node].left
                       : nodes_[node].right;
        }
        return nodes_[node].weight;
    }

  private:
    struct Node {
        bool leaf = true;
        int feature = -1;
        double threshold = 0.0;
        std::size_t left = 0, right = 0;
        double weight = 0.0;
    };

    static constexpr double kLambda = 1e-6;

    static double leaf_weight(double G, double H) { return G / (H + kLambda); }
    static double gain_term(double G, double H) { return G * G / (H + kLambda); }

    std::size_t build(const std::vector<std::array<double, kNumFeatures>>& x,
                      const std::vector<double>& g, const std::vector<double>& h,
                      std::vector<int>& idx, int depth, int max_depth, int min_leaf) {
        const std::size_t me = nodes_.size();
        nodes_.emplace_back();
        double G = 0.0, H = 0.0;
        for (int i : idx) {
            G += g[static_cast<std::size_t>(i)];
            H += h[static_cast<std::size_t>(i)];
        }
        nodes_[me].weight = leaf_weight(G, H);
        if (depth >= max_depth || static_cast<int>(idx.size()) < 2 * min_leaf) {
            return me;
        }

        int best_f = -1;
        double best_thr = 0.0;
        double best_gain = 1e-12;  // require a strictly positive improvement
        std::vector<std::pair<double, int>> vals(idx.size());
        for (int f = 0; f < kNumFeatures; ++f) {
            for (std::size_t i = 0; i < idx.size(); ++i) {
                vals[i] = {x[static_cast<std::size_t>(idx[i])][static_cast<std::size_t>(f)],
                           idx[i]};
            }
            std::sort(vals.begin(), vals.end());
            double Gl = 0.0, Hl = 0.0;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                Gl += g[static_cast<std::size_t>(vals[i].second)];
                Hl += h[static_cast<std::size_t>(vals[i].second)];
                const double a = vals[i].first, b = vals[i + 1].first;
                if (!(b > a)) continue;
                const int n_l = static_cast<int>(i) + 1;
                const int n_r = static_cast<int>(vals.size()) - n_l;
                if (n_l < min_leaf || n_r < min_leaf) continue;
                const double gain =
                    gain_term(Gl, Hl) + gain_term(G - Gl, H - Hl) - gain_term(G, H);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = f;
                    best_thr = 0.5 * (a + b);
                }
            }
        }
        if (best_f < 0) return me;

        std::vector<int> left, right;
        for (int i : idx) {
            (x[static_cast<std::size_t>(i)][static_cast<std::size_t>(best_f)] <= best_thr
                 ? left
                 : right)
                .push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();
        const std::size_t l = build(x, g, h, left, depth + 1, max_depth, min_leaf);
        const std::size_t r = build(x, g, h, right, depth + 1, max_depth, min_leaf);
        nodes_[me].leaf = false;
        nodes_[me].feature = best_f;
        nodes_[me].threshold = best_thr;
        nodes_[me].left = l;
        nodes_[me].right = r;
        return me;
    }

    std::vector<Node> nodes_;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

class GradientBoosting {
  public:
    GradientBoosting(const std::vector<FeatureVector>& rows,
                     const std::vector<int>& train_idx, GbtParams p)
        : params_(p) {
        if (p.rounds < 1 || p.max_depth < 1 || !(p.shrinkage > 0.0 && p.shrinkage <= 1.0)) {
            throw DataError("GradientBoosting: invalid rounds/max_depth/shrinkage");
        }
        const std::size_t n = train_idx.size();
        if (n == 0) throw DataError("GradientBoosting: empty training set");

        std::vector<std::array<double, kNumFeatures>> x(n);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rows[static_cast<std::size_t>(train_idx[i])].features();
            y[i] = rows[static_cast<std::size_t>(train_idx[i])].label == Label::Go ? 1.0 : 0.0;
        }

        double p_go = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
        p_go = std::clamp(p_go, 1e-6, 1.0 - 1e-6);
        f0_ = std::log(p_go / (1.0 - p_go));

        std::vector<double> score(n, f0_);
        std::vector<double> grad(n), hess(n);
        std::vector<int> all(static_cast<int>(n));
        std::iota(all.begin(), all.end(), 0);
        training_loss_.reserve(static_cast<std::size_t>(p.rounds) + 1);
        training_loss_.push_back(mean_logloss(score, y));
        for (int round = 0; round < p.rounds; ++round) {
            for (std::size_t i = 0; i < n; ++i) {
                const double prob = detail::sigmoid(score[i]);
                grad[i] = y[i] - prob;  // negative gradient of the logistic loss
                hess[i] = std::max(prob * (1.0 - prob), 1e-12);
            }
            std::vector<int> idx = all;
            trees_.emplace_back(x, grad, hess, std::move(idx), p.max_depth, p.min_leaf);
            for (std::size_t i = 0; i < n; ++i) {
                score[i] += p.shrinkage * trees_.back().value(x[i]);
            }
            training_loss_.push_back(mean_logloss(score, y));
        }
    }

    /// Raw additive score F(x); positive favors Go.
    double decision(const FeatureVector& fv) const {
        const auto f = fv.features();
        double s = f0_;
        for (const auto& t : trees_) s += params_.shrinkage * t.value(f);
        return s;
    }

    double score(const FeatureVector& fv) const { return detail::sigmoid(decision(fv)); }

    Label predict(const FeatureVector& fv) const {
        return score(fv) > 0.5 ? Label::Go : Label::Stop;
    }

    /// Mean training logistic loss before any round and after each round.
    const std::vector<double>& training_loss() const { return training_loss_; }

  private:
    static double mean_logloss(const std::vector<double>& score, const std::vector<double>& y) {
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            // numerically stable: log(1 + e^s) - y*s
            const double s = score[i];
            const double log1pe = s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
            acc += log1pe - y[i] * s;
        }
        return acc / static_cast<double>(y.size());
    }

    GbtParams params_;
    double f0_ = 0.0;
    std::vector<detail::GradTree> trees_;
    std::vector<double> training_loss_;
};

// ---------------------------------------------------------------------------
// Unified training entry point
// ---------------------------------------------------------------------------

enum class ModelKind { KNN, DecisionTree, RandomForest, GradientBoosting };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::KNN: return "knn";
        case ModelKind::DecisionTree: return "tree";
        case ModelKind::RandomForest: return "forest";
        case ModelKind::GradientBoosting: return "boosting";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "knn") return ModelKind::KNN;
    if (s == "tree") return ModelKind::DecisionTree;
    if (s == "forest") return ModelKind::RandomForest;
    if (s == "boosting") return ModelKind::GradientBoosting;
    throw DataError("unknown model '" + s + "' (knn, tree, forest, boosting)");
}

inline constexpr std::array<ModelKind, 4> kAllModelKinds = {
    ModelKind::KNN, ModelKind::DecisionTree, ModelKind::RandomForest,
    ModelKind::GradientBoosting};

struct TrainParams {
    double test_fraction = 0.2;
    KnnParams knn{};
    TreeParams tree{};
    ForestParams forest{};
    GbtParams gbt{};
};

/// A classifier fitted on the training side of a stratified split. Scores are
/// Go-probability-like: neighbor-vote fraction (KNN), leaf probability
/// (tree), tree-vote fraction (forest), or the logistic of the additive
/// score (boosting).
class FittedModel {
  public:
    FittedModel(const Dataset& ds, ModelKind kind, const TrainParams& p = {})
        : kind_(kind), split_(stratified_split(ds, p.test_fraction)) {
        switch (kind) {
            case ModelKind::KNN:
                impl_.emplace<Knn>(ds.rows, split_.train, p.knn);
                break;
            case ModelKind::DecisionTree:
                impl_.emplace<DecisionTree>(ds.rows, split_.train, p.tree);
                break;
            case ModelKind::RandomForest: {
                ForestParams fp = p.forest;
                // tie the default tree-sampling stream to the dataset so runs
                // stay reproducible without explicit seeding
                fp.seed = derive_seed(ds.split_seed, fp.seed + 0xB0057EDULL);
                impl_.emplace<RandomForest>(ds.rows, split_.train, fp);
                break;
            }
            case ModelKind::GradientBoosting:
                impl_.emplace<GradientBoosting>(ds.rows, split_.train, p.gbt);
                break;
        }
    }

    double score(const FeatureVector& fv) const {
        return std::visit(
            [&](const auto& m) -> double {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>) {
                    throw DataError("FittedModel: not fitted");
                } else {
                    return m.score(fv);
                }
            },
            impl_);
    }

    Label predict(const FeatureVector& fv) const {
        return std::visit(
            [&](const auto& m) -> Label {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>) {
                    throw DataError("FittedModel: not fitted");
                } else {
                    return m.predict(fv);
                }
            },
            impl_);
    }

    ModelKind kind() const { return kind_; }
    const SplitIndices& split() const { return split_; }

    const Knn* knn() const { return std::get_if<Knn>(&impl_); }
    const GradientBoosting* boosting() const { return std::get_if<GradientBoosting>(&impl_); }

  private:
    ModelKind kind_;
    SplitIndices split_;
    std::variant<std::monostate, Knn, DecisionTree, RandomForest, GradientBoosting> impl_;
};

inline FittedModel train(const Dataset& ds, ModelKind kind, const TrainParams& p = {}) {
    return FittedModel(ds, kind, p);
}

// ---------------------------------------------------------------------------
// Evaluation: confusion metrics, ROC, AUC
// ---------------------------------------------------------------------------

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

/// Threshold sweep over the distinct score values, descending; tied scores
/// move together so any strictly monotone transform of the scores yields the
/// identical curve.
inline std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                       const std::vector<int>& is_positive) {
    if (scores.size() != is_positive.size() || scores.empty()) {
        throw DataError("roc_curve: need matching, nonempty scores and labels");
    }
    int n_pos = 0;
    for (int y : is_positive) n_pos += (y != 0);
    const int n_neg = static_cast<int>(scores.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("roc_curve: needs both classes present");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> out;
    out.push_back({0.0, 0.0});
    int tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (is_positive[order[i]] != 0) ++tp;
            else ++fp;
            ++i;
        }
        out.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
    }
    return out;
}

inline double auc_trapezoid(const std::vector<RocPoint>& roc) {
    if (roc.size() < 2) throw DataError("auc_trapezoid: need at least 2 points");
    double auc = 0.0;
    for (std::size_t i = 1; i < roc.size(); ++i) {
        auc += (roc[i].fpr - roc[i - 1].fpr) * 0.5 * (roc[i].tpr + roc[i - 1].tpr);
    }
    return auc;
}

/// Go-positive confusion-matrix summary. `defined` is false when the ground
/// truth holds a single class, leaving the positive-class rates undefined.
struct Confusion {
    int tp = 0, fp = 0, tn = 0, fn = 0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool defined = true;
};

inline Confusion confusion_metrics(const std::vector<Label>& predicted,
                                   const std::vector<Label>& truth) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw DataError("confusion_metrics: need matching, nonempty label lists");
    }
    Confusion c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == Label::Go) {
            (predicted[i] == Label::Go ? c.tp : c.fn) += 1;
        } else {
            (predicted[i] == Label::Go ? c.fp : c.tn) += 1;
        }
    }
    c.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(truth.size());
    if (c.tp + c.fn == 0 || c.fp + c.tn == 0) {
        c.defined = false;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        c.precision = c.recall = c.f1 = nan;
        return c;
    }
    c.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
    c.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
    c.f1 = (c.precision + c.recall) > 0.0
               ? 2.0 * c.precision * c.recall / (c.precision + c.recall)
               : 0.0;
    return c;
}

struct ClassifierMetrics {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<RocPoint> roc;
    double auc = 0.0;
    bool defined = true;  // false: single-class test split, so the
                          // positive-class rates and the ROC are undefined
};

/// Go is the positive class throughout (the safety-critical "rush out" side).
inline ClassifierMetrics evaluate(const FittedModel& model, const Dataset& ds) {
    const auto& split = model.split();
    if (split.test.empty()) throw DataError("evaluate: empty test split");
    ClassifierMetrics m;

    int train_hits = 0;
    for (int i : split.train) {
        const auto& row = ds.rows[static_cast<std::size_t>(i)];
        train_hits += (model.predict(row) == row.label);
    }
    m.train_accuracy = static_cast<double>(train_hits) / split.train.size();

    std::vector<Label> predicted, truth;
    std::vector<double> scores;
    std::vector<int> positives;
    predicted.reserve(split.test.size());
    truth.reserve(split.test.size());
    scores.reserve(split.test.size());
    positives.reserve(split.test.size());
    for (int i : split.test) {
        const auto& row = ds.rows[static_cast<std::size_t>(i)];
        predicted.push_back(model.predict(row));
        truth.push_back(row.label);
        scores.push_back(model.score(row));
        positives.push_back(row.label == Label::Go ? 1 : 0);
    }
    const Confusion c = confusion_metrics(predicted, truth);
    m.test_accuracy = c.accuracy;
    m.precision = c.precision;
    m.recall = c.recall;
    m.f1 = c.f1;
    m.defined = c.defined;
    if (!m.defined) {
        m.auc = std::numeric_limits<double>::quiet_NaN();
        return m;
    }
    m.roc = roc_curve(scores, positives);
    m.auc = auc_trapezoid(m.roc);
    return m;
}

inline nlohmann::json metrics_to_json(const ClassifierMetrics& m) {
    nlohmann::json j;
    j["train_accuracy"] = m.train_accuracy;
    j["test_accuracy"] = m.test_accuracy;
    j["defined"] = m.defined;
    if (m.defined) {
        j["precision"] = m.precision;
        j["recall"] = m.recall;
        j["f1"] = m.f1;
        j["auc"] = m.auc;
        j["roc_points"] = m.roc.size();
    }
    return j;
}

inline std::string roc_to_csv(const std::vector<RocPoint>& roc) {
    std::ostringstream out;
    out << "fpr,tpr\n";
    for (const auto& p : roc) {
        out << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Synthetic benchmark datasets
// ---------------------------------------------------------------------------

inline constexpr int kSyntheticRows = 288;
inline constexpr int kSyntheticGoRows = 71;  // 24.65% of 288

namespace detail {

inline double clip_nonneg(double v) { return v < 0.0 ? 0.0 : v; }

}  // namespace detail

/// 288 rows, exactly 71 labeled Go, with class-conditional feature
/// distributions: Go drivers carry more speed and headway margin, face lower
/// required decelerations, ride smoother, dwell longer on the road, and show
/// less pupil dilation. Separation is clear but every marginal overlaps.
inline Dataset make_synthetic_dataset(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xDA7A1ULL));
    Dataset ds;
    ds.split_seed = derive_seed(seed, 0x5137ULL);
    ds.rows.reserve(kSyntheticRows);
    for (int i = 0; i < kSyntheticRows; ++i) {
        const bool go = i < kSyntheticGoRows;
        FeatureVector fv;
        if (go) {
            fv.v_i = detail::clip_nonneg(8.3 + 1.0 * rng.normal());
            fv.h_t = 2.05 + 0.35 * rng.normal();
            fv.an = detail::clip_nonneg(0.70 + 0.22 * rng.normal());
            fv.drac = detail::clip_nonneg(2.0 + 0.8 * rng.normal());
            fv.mfd_road = detail::clip_nonneg(0.95 + 0.20 * rng.normal());
            fv.pd_bar = detail::clip_nonneg(38.5 + 2.5 * rng.normal());
            fv.label = Label::Go;
        } else {
            fv.v_i = detail::clip_nonneg(6.4 + 1.0 * rng.normal());
            fv.h_t = 1.05 + 0.30 * rng.normal();
            fv.an = detail::clip_nonneg(1.15 + 0.30 * rng.normal());
            fv.drac = detail::clip_nonneg(4.3 + 1.1 * rng.normal());
            fv.mfd_road = detail::clip_nonneg(0.55 + 0.15 * rng.normal());
            fv.pd_bar = detail::clip_nonneg(42.5 + 2.5 * rng.normal());
            fv.label = Label::Stop;
        }
        ds.rows.push_back(fv);
    }
    for (std::size_t i = ds.rows.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(ds.rows[i - 1], ds.rows[j]);
    }
    return ds;
}

/// Same shape (288 rows, 71 Go) but the label depends on a speed-headway
/// interaction rather than any single feature: the 71 largest values of the
/// off-center product ((v_i - 6.8)/1.4) * ((h_t - 1.3)/0.45) go. The four
/// remaining features are uninformative noise.
inline Dataset make_synthetic_dataset_nonlinear(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xDA7A2ULL));
    Dataset ds;
    ds.split_seed = derive_seed(seed, 0x5138ULL);
    ds.rows.reserve(kSyntheticRows);
    std::vector<std::pair<double, int>> z(kSyntheticRows);
    for (int i = 0; i < kSyntheticRows; ++i) {
        FeatureVector fv;
        fv.v_i = detail::clip_nonneg(7.5 + 1.4 * rng.normal());
        fv.h_t = 1.55 + 0.45 * rng.normal();
        fv.an = detail::clip_nonneg(0.90 + 0.30 * rng.normal());
        fv.drac = detail::clip_nonneg(3.2 + 1.1 * rng.normal());
        fv.mfd_road = detail::clip_nonneg(0.75 + 0.22 * rng.normal());
        fv.pd_bar = detail::clip_nonneg(40.5 + 3.0 * rng.normal());
        fv.label = Label::Stop;
        z[static_cast<std::size_t>(i)] = {((fv.v_i - 6.8) / 1.4) * ((fv.h_t - 1.3) / 0.45),
                                          i};
        ds.rows.push_back(fv);
    }
    std::sort(z.begin(), z.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < kSyntheticGoRows; ++k) {
        ds.rows[static_cast<std::size_t>(z[static_cast<std::size_t>(k)].second)].label =
            Label::Go;
    }
    return ds;
}

}  // namespace rsim::intent
