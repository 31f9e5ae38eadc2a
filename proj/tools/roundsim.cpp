// roundsim: command-line front end for the roundabout warning toolkit.
//
// Subcommands:
//   simulate  run the 3x3 factorial design and write per-trial trajectories
//   metrics   recompute surrogate safety measures from recorded trials
//   predict   train and evaluate a stop/go intent classifier
//   stats     repeated-measures ANOVA over a combined metrics table
//
// Exit codes:
//   0  success
//   2  usage or configuration error
//   3  I/O failure
//   4  empty input (nothing to do)
//   5  data-shape violation (unbalanced design, missing class, ...)
//
// All randomness flows from the --seed values recorded in the outputs; the
// tool never reads the wall clock or OS entropy, so identical invocations
// produce byte-identical files and --jobs only changes the wall time.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <filesystem>

#include "CLI11.hpp"
#include "json.hpp"
#include "rsim/rsim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "roundsim 1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitEmpty = 4;
constexpr int kExitShape = 5;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw rsim::IoError("cannot open '" + path + "'");
    std::ostringstream out;
    out << in.rdbuf();
    if (in.bad()) throw rsim::IoError("read from '" + path + "' failed");
    return out.str();
}

void write_text(const std::string& path, const std::string& text) {
    rsim::csv::write_file(path, text);
}

void make_dirs(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw rsim::IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<int> repeats;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

std::string trial_dir_name(std::size_t index, const rsim::scenario::TrialResult& t) {
    char idx[8];
    std::snprintf(idx, sizeof(idx), "%03zu", index);
    return std::string("trial_") + idx + "_" + rsim::aggressiveness_name(t.level) + "_" +
           rsim::warning_level_name(t.warning) + "_r" + std::to_string(t.repeat);
}

json warning_event_json(const rsim::warning::WarningEvent& w) {
    return json{{"t_issue", w.t_issue},
                {"t_predicted_collision", w.t_predicted_collision},
                {"lead", w.lead},
                {"level", rsim::warning_level_name(w.level)}};
}

json optional_json(const std::optional<double>& v) {
    if (v) return json(*v);
    return json(nullptr);
}

json trial_manifest_json(const rsim::scenario::ScenarioConfig& cfg,
                         const rsim::scenario::TrialResult& t, std::size_t index,
                         const rsim::ssm::SafetyReport& report) {
    json m;
    m["schema_version"] = 1;
    m["tool"] = kToolVersion;
    m["trial"] = json{{"index", index},
                      {"aggressiveness", rsim::aggressiveness_name(t.level)},
                      {"warning", rsim::warning_level_name(t.warning)},
                      {"repeat", t.repeat}};
    m["config"] = cfg;  // full echo: lets downstream tools rebuild the geometry
    m["driver"] = t.driver;
    m["decision"] = rsim::decision_name(t.decision);
    m["end_reason"] = rsim::scenario::end_reason_name(t.end_reason);
    m["collision"] = t.collision;
    m["t_end"] = t.t_end;
    m["t_ego_entry"] = t.t_ego_entry;
    m["t_ego_conflict"] = optional_json(t.t_ego_conflict);
    m["t_aggressive_entry"] = optional_json(t.t_aggressive_entry);
    m["realized_entry_headway"] = optional_json(t.realized_entry_headway);
    m["launch_time"] = t.launch_time;
    m["spawn_s"] = t.spawn_s;
    m["warning_event"] = t.warning_event ? warning_event_json(*t.warning_event) : json(nullptr);
    m["visual_detect_time"] = optional_json(t.visual_detect_time);
    m["response_onset"] = optional_json(t.response_onset);
    m["safety"] = rsim::ssm::safety_report_json(report);
    m["files"] = json{{"ego", "ego.csv"}, {"aggressive", "aggressive.csv"}};
    return m;
}

int run_simulate(const SimulateOptions& opt) {
    // Phase 1: configuration. Any problem here is a config error (exit 2).
    rsim::scenario::ScenarioConfig cfg;
    try {
        const std::string text = slurp(opt.config_path);
        const json j = json::parse(text);
        cfg = j.get<rsim::scenario::ScenarioConfig>();
        if (opt.repeats) cfg.repeats = *opt.repeats;
        if (opt.seed) cfg.seed = *opt.seed;
        cfg.validate();
    } catch (const json::exception& e) {
        std::cerr << "error: config '" << opt.config_path << "': " << e.what() << "\n";
        return kExitUsage;
    } catch (const rsim::Error& e) {
        std::cerr << "error: config '" << opt.config_path << "': " << e.what() << "\n";
        return kExitUsage;
    }

    // Phase 2: simulation. Failures mean the config asked for an unrunnable
    // design (impossible headway schedule, horizon too short, ...).
    rsim::scenario::DesignResult design;
    std::vector<std::uint64_t> repeat_seeds;
    try {
        repeat_seeds = rsim::scenario::design_repeat_seeds(cfg);
        design = rsim::scenario::run_design(cfg, repeat_seeds, opt.jobs);
    } catch (const rsim::Error& e) {
        std::cerr << "error: simulation failed: " << e.what() << "\n";
        return kExitUsage;
    }

    // Phase 3: outputs. Failures here are I/O errors (exit 3).
    try {
        make_dirs(opt.out_dir);
        json run;
        run["schema_version"] = 1;
        run["tool"] = kToolVersion;
        run["command"] = "simulate";
        run["config"] = cfg;
        run["seed"] = cfg.seed;
        run["repeat_seeds"] = repeat_seeds;

        json trials = json::array();
        int collisions = 0;
        int warned = 0;
        double sum_min_ttc = 0.0;
        int n_min_ttc = 0;
        double sum_cpi = 0.0;
        double sum_max_decel = 0.0;
        for (std::size_t i = 0; i < design.trials.size(); ++i) {
            const auto& t = design.trials[i];
            const std::string name = trial_dir_name(i, t);
            const fs::path dir = fs::path(opt.out_dir) / name;
            make_dirs(dir);
            write_text((dir / "ego.csv").string(), rsim::trajectory_to_csv(t.ego));
            write_text((dir / "aggressive.csv").string(),
                       rsim::trajectory_to_csv(t.aggressive));
            const rsim::ssm::SafetyReport report = rsim::scenario::trial_safety_report(cfg, t);
            write_text((dir / "manifest.json").string(),
                       trial_manifest_json(cfg, t, i, report).dump(2) + "\n");

            trials.push_back(json{{"dir", name},
                                  {"aggressiveness", rsim::aggressiveness_name(t.level)},
                                  {"warning", rsim::warning_level_name(t.warning)},
                                  {"repeat", t.repeat},
                                  {"collision", t.collision},
                                  {"warned", t.warning_event.has_value()}});
            collisions += t.collision ? 1 : 0;
            warned += t.warning_event ? 1 : 0;
            if (report.has_min_ttc) {
                sum_min_ttc += report.min_ttc;
                ++n_min_ttc;
            }
            sum_cpi += report.cpi;
            sum_max_decel += report.max_decel;
        }
        run["trials"] = trials;
        json summary;
        summary["n_trials"] = design.trials.size();
        summary["n_collisions"] = collisions;
        summary["n_warned"] = warned;
        summary["mean_min_ttc"] =
            n_min_ttc > 0 ? json(sum_min_ttc / n_min_ttc) : json(nullptr);
        summary["mean_cpi"] = design.trials.empty()
                                  ? json(nullptr)
                                  : json(sum_cpi / static_cast<double>(design.trials.size()));
        summary["mean_max_decel"] =
            design.trials.empty()
                ? json(nullptr)
                : json(sum_max_decel / static_cast<double>(design.trials.size()));
        run["summary"] = summary;
        write_text((fs::path(opt.out_dir) / "run_manifest.json").string(), run.dump(2) + "\n");
        std::cout << "wrote " << design.trials.size() << " trials to " << opt.out_dir << "\n";
    } catch (const rsim::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

struct MetricsOptions {
    std::string trials_dir;
    std::string out_path;
};

// Rebuilds the surrogate safety report of one recorded trial from its CSVs
// and manifest alone (the manifest's config echo fixes the path geometry).
std::string metrics_row(const fs::path& dir) {
    const json manifest = json::parse(slurp((dir / "manifest.json").string()));
    const auto cfg = manifest.at("config").get<rsim::scenario::ScenarioConfig>();
    const double t_entry = manifest.at("t_ego_entry").get<double>();
    const auto& trial = manifest.at("trial");
    const std::string warning = trial.at("warning").get<std::string>();
    const std::string aggressiveness = trial.at("aggressiveness").get<std::string>();
    const int repeat = trial.at("repeat").get<int>();
    rsim::parse_warning_level(warning);        // validate the recorded labels
    rsim::parse_aggressiveness(aggressiveness);

    const rsim::Trajectory ego =
        rsim::ingest_trajectory_csv((dir / manifest.at("files").at("ego").get<std::string>()).string());
    const rsim::Trajectory agg = rsim::ingest_trajectory_csv(
        (dir / manifest.at("files").at("aggressive").get<std::string>()).string());

    const rsim::geom::PathGeometry g = rsim::geom::make_roundabout_geometry(cfg.layout);
    rsim::ssm::ConflictGeometry cg;
    const rsim::geom::Vec2 m = g.ego_path.position(g.conflict_s_ego);
    cg.conflict_x = m.x;
    cg.conflict_y = m.y;
    cg.dist_to_conflict_i.reserve(ego.points.size());
    for (const auto& p : ego.points) {
        cg.dist_to_conflict_i.push_back(g.conflict_s_ego - g.ego_path.project({p.x, p.y}));
    }
    cg.dist_to_conflict_j.reserve(agg.points.size());
    for (const auto& p : agg.points) {
        cg.dist_to_conflict_j.push_back(g.conflict_s_agg - g.aggressive_path.project({p.x, p.y}));
    }

    rsim::ssm::VehicleSpec ego_spec;
    ego_spec.radius = cfg.ego_radius;
    rsim::ssm::VehicleSpec agg_spec;
    agg_spec.radius = cfg.aggressive_radius;
    const rsim::ssm::SafetyReport report =
        rsim::ssm::safety_report(ego, agg, ego_spec, agg_spec, cg, t_entry);

    std::ostringstream row;
    row << dir.filename().string() << ',' << repeat << ',' << warning << ',' << aggressiveness
        << ',' << rsim::ssm::safety_report_csv_row(report);
    return row.str();
}

int run_metrics(const MetricsOptions& opt) {
    std::vector<fs::path> trial_dirs;
    try {
        if (!fs::exists(opt.trials_dir)) {
            throw rsim::IoError("cannot open '" + opt.trials_dir + "': no such directory");
        }
        if (!fs::is_directory(opt.trials_dir)) {
            throw rsim::IoError("'" + opt.trials_dir + "' is not a directory");
        }
        for (const auto& entry : fs::directory_iterator(opt.trials_dir)) {
            if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
                trial_dirs.push_back(entry.path());
            }
        }
    } catch (const rsim::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    if (trial_dirs.empty()) {
        std::cerr << "error: no trial directories under '" << opt.trials_dir << "'\n";
        return kExitEmpty;
    }
    std::sort(trial_dirs.begin(), trial_dirs.end());

    std::ostringstream out;
    out << "trial,subject,warning,aggressiveness," << rsim::ssm::safety_report_csv_header()
        << "\n";
    std::size_t ok = 0;
    std::size_t skipped = 0;
    for (const auto& dir : trial_dirs) {
        try {
            out << metrics_row(dir) << "\n";
            ++ok;
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping " << dir.filename().string() << ": " << e.what()
                      << "\n";
            ++skipped;
        }
    }
    if (ok == 0) {
        std::cerr << "error: all " << skipped << " trial directories were unreadable\n";
        return kExitEmpty;
    }
    try {
        write_text(opt.out_path, out.str());
    } catch (const rsim::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    std::cout << "wrote " << ok << " safety rows to " << opt.out_path;
    if (skipped > 0) std::cout << " (" << skipped << " trials skipped)";
    std::cout << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictOptions {
    std::string data_path;
    std::string synthetic;  // "", "linear", or "nonlinear"
    std::string model = "boosting";
    std::uint64_t seed = 3;
    bool seed_given = false;
    std::string out_path;
    std::string roc_path;
    rsim::intent::TrainParams params;
    bool forest_no_bootstrap = false;
};

std::string default_roc_path(const std::string& out_path) {
    std::string stem = out_path;
    const std::string ext = ".json";
    if (stem.size() > ext.size() && stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0) {
        stem.resize(stem.size() - ext.size());
    }
    return stem + "_roc.csv";
}

json train_params_json(const rsim::intent::TrainParams& p) {
    return json{{"test_fraction", p.test_fraction},
                {"knn_k", p.knn.k},
                {"tree_max_depth", p.tree.max_depth},
                {"tree_min_leaf", p.tree.min_leaf},
                {"forest_trees", p.forest.n_trees},
                {"forest_mtry", p.forest.mtry},
                {"forest_bootstrap", p.forest.bootstrap},
                {"gbt_rounds", p.gbt.rounds},
                {"gbt_max_depth", p.gbt.max_depth},
                {"gbt_shrinkage", p.gbt.shrinkage},
                {"gbt_min_leaf", p.gbt.min_leaf}};
}

int run_predict(PredictOptions opt) {
    rsim::intent::ModelKind kind;
    try {
        kind = opt.model == "gbt" ? rsim::intent::ModelKind::GradientBoosting
                                  : rsim::intent::parse_model_kind(opt.model);
    } catch (const rsim::Error& e) {
        std::cerr << "error: " << e.what() << " ('gbt' is accepted as an alias for 'boosting')\n";
        return kExitUsage;
    }

    rsim::intent::Dataset ds;
    std::string source;
    try {
        if (!opt.synthetic.empty()) {
            source = "synthetic-" + opt.synthetic;
            ds = opt.synthetic == "nonlinear"
                     ? rsim::intent::make_synthetic_dataset_nonlinear(opt.seed)
                     : rsim::intent::make_synthetic_dataset(opt.seed);
        } else {
            source = opt.data_path;
            ds = rsim::intent::ingest_dataset_csv(opt.data_path);
            if (opt.seed_given) ds.split_seed = opt.seed;
        }
    } catch (const rsim::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const rsim::EmptyInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEmpty;
    } catch (const rsim::Error& e) {
        std::cerr << "error: dataset: " << e.what() << "\n";
        return kExitShape;
    }

    if (opt.forest_no_bootstrap) opt.params.forest.bootstrap = false;

    rsim::intent::ClassifierMetrics metrics;
    std::vector<rsim::intent::RocPoint> roc;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    try {
        const rsim::intent::FittedModel model = rsim::intent::train(ds, kind, opt.params);
        metrics = rsim::intent::evaluate(model, ds);
        roc = metrics.roc;
        train_rows = model.split().train.size();
        test_rows = model.split().test.size();
    } catch (const rsim::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitShape;
    }

    try {
        std::size_t go_rows = 0;
        for (const auto& row : ds.rows) {
            go_rows += row.label == rsim::intent::Label::Go ? 1 : 0;
        }
        json out;
        out["schema_version"] = 1;
        out["tool"] = kToolVersion;
        out["command"] = "predict";
        out["model"] = rsim::intent::model_kind_name(kind);
        out["seed"] = opt.seed;
        out["dataset"] = json{{"source", source},
                              {"rows", ds.rows.size()},
                              {"go_rows", go_rows},
                              {"split_seed", ds.split_seed},
                              {"train_rows", train_rows},
                              {"test_rows", test_rows}};
        out["params"] = train_params_json(opt.params);
        out["metrics"] = rsim::intent::metrics_to_json(metrics);
        write_text(opt.out_path, out.dump(2) + "\n");
        const std::string roc_path =
            opt.roc_path.empty() ? default_roc_path(opt.out_path) : opt.roc_path;
        write_text(roc_path, rsim::intent::roc_to_csv(roc));
        std::cout << "model=" << rsim::intent::model_kind_name(kind)
                  << " test_accuracy=" << rsim::format_double(metrics.test_accuracy);
        if (metrics.defined) std::cout << " auc=" << rsim::format_double(metrics.auc);
        std::cout << "\nwrote " << opt.out_path << " and " << roc_path << "\n";
    } catch (const rsim::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

struct StatsOptions {
    std::string metrics_path;
    std::string metric = "cpi";
    std::string out_path;
};

std::size_t find_column(const rsim::csv::Table& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == name) return i;
    }
    std::string cols;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        cols += (i ? ", " : "") + t.header[i];
    }
    throw rsim::ParseError("no column '" + name + "' (available: " + cols + ")");
}

int run_stats(const StatsOptions& opt) {
    std::vector<rsim::stats::FactorialSample> samples;
    try {
        const rsim::csv::Table table = rsim::csv::read_file(opt.metrics_path);
        const std::vector<std::string> plain = {"subject", "warning", "aggressiveness", "value"};
        if (table.header == plain) {
            // Bare long-format factorial table: the value column is the metric.
            samples = rsim::stats::read_factorial_csv(opt.metrics_path);
        } else {
            const std::size_t c_subj = find_column(table, "subject");
            const std::size_t c_warn = find_column(table, "warning");
            const std::size_t c_aggr = find_column(table, "aggressiveness");
            const std::size_t c_val = find_column(table, opt.metric);
            for (std::size_t r = 0; r < table.rows.size(); ++r) {
                const auto& row = table.rows[r];
                const std::size_t lineno = table.line_numbers[r];
                const std::size_t need =
                    std::max(std::max(c_subj, c_warn), std::max(c_aggr, c_val));
                if (row.size() <= need) {
                    throw rsim::ParseError("line " + std::to_string(lineno) + ": expected at least " +
                                           std::to_string(need + 1) + " fields, got " +
                                           std::to_string(row.size()));
                }
                if (row[c_val].empty()) continue;  // undefined metric for this trial
                rsim::stats::FactorialSample s;
                s.subject_id =
                    static_cast<int>(rsim::csv::parse_long(row[c_subj], lineno, "subject"));
                s.warning = rsim::parse_warning_level(row[c_warn]);
                s.aggressiveness = rsim::parse_aggressiveness(row[c_aggr]);
                s.value = rsim::csv::parse_double(row[c_val], lineno, opt.metric);
                samples.push_back(s);
            }
        }
    } catch (const rsim::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const rsim::EmptyInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEmpty;
    } catch (const rsim::Error& e) {
        std::cerr << "error: '" << opt.metrics_path << "': " << e.what() << "\n";
        return kExitUsage;
    }
    if (samples.empty()) {
        std::cerr << "error: no usable rows for metric '" << opt.metric << "'\n";
        return kExitEmpty;
    }

    rsim::stats::AnovaResult result;
    try {
        result = rsim::stats::rm_anova(samples);
    } catch (const rsim::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitShape;
    }

    try {
        write_text(opt.out_path, rsim::stats::anova_table_csv(result));
    } catch (const rsim::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    std::cout << "metric=" << opt.metric << " subjects=" << result.n_subjects
              << " warning: F=" << rsim::format_double(result.warning.F)
              << " p=" << rsim::format_double(result.warning.p)
              << "; aggressiveness: F=" << rsim::format_double(result.aggressiveness.F)
              << " p=" << rsim::format_double(result.aggressiveness.p)
              << "; interaction: F=" << rsim::format_double(result.interaction.F)
              << " p=" << rsim::format_double(result.interaction.p) << "\n";
    std::cout << "wrote " << opt.out_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Headless roundabout warning simulator and analysis toolkit"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    int rc = kExitOk;

    // --- simulate ---------------------------------------------------------
    SimulateOptions sim;
    int sim_repeats = 0;
    std::uint64_t sim_seed = 0;
    auto* simulate = app.add_subcommand(
        "simulate", "Run the warning-by-aggressiveness design and record each trial");
    simulate->add_option("--config", sim.config_path, "Scenario configuration JSON")->required();
    simulate->add_option("--out", sim.out_dir, "Output directory for trials")->required();
    auto* opt_repeats =
        simulate->add_option("--repeats", sim_repeats, "Override the configured repeat count");
    auto* opt_seed = simulate->add_option("--seed", sim_seed, "Override the configured seed");
    simulate->add_option("--jobs", sim.jobs, "Worker threads (outputs are identical for any value)")
        ->check(CLI::PositiveNumber);
    simulate->callback([&]() {
        if (*opt_repeats) sim.repeats = sim_repeats;
        if (*opt_seed) sim.seed = sim_seed;
        rc = run_simulate(sim);
    });

    // --- metrics ----------------------------------------------------------
    MetricsOptions met;
    auto* metrics = app.add_subcommand(
        "metrics", "Recompute surrogate safety measures from recorded trial directories");
    metrics->add_option("--trials", met.trials_dir, "Directory of trial subdirectories")
        ->required();
    metrics->add_option("--out", met.out_path, "Combined safety-measure CSV to write")
        ->required();
    metrics->callback([&]() { rc = run_metrics(met); });

    // --- predict ----------------------------------------------------------
    PredictOptions pred;
    auto* predict = app.add_subcommand(
        "predict", "Train and evaluate a stop/go intent classifier on a feature dataset");
    auto* opt_data = predict->add_option("--data", pred.data_path, "Feature dataset CSV");
    auto* opt_synth =
        predict
            ->add_option("--synthetic", pred.synthetic,
                         "Use a built-in benchmark dataset instead of --data")
            ->check(CLI::IsMember({"linear", "nonlinear"}));
    opt_data->excludes(opt_synth);
    opt_synth->excludes(opt_data);
    predict->add_option("--model", pred.model, "knn, tree, forest, or boosting (alias: gbt)")
        ->required();
    auto* opt_pseed = predict->add_option("--seed", pred.seed,
                                          "Dataset generation / stratified-split seed");
    predict->add_option("--out", pred.out_path, "Metrics JSON to write")->required();
    predict->add_option("--roc", pred.roc_path,
                        "ROC CSV to write (default: metrics path with _roc.csv)");
    predict->add_option("--test-fraction", pred.params.test_fraction,
                        "Held-out fraction for the stratified split");
    predict->add_option("--knn-k", pred.params.knn.k, "Neighbour count");
    predict->add_option("--tree-depth", pred.params.tree.max_depth, "Decision-tree depth limit");
    predict->add_option("--tree-min-leaf", pred.params.tree.min_leaf,
                        "Minimum samples per tree leaf");
    predict->add_option("--forest-trees", pred.params.forest.n_trees, "Trees in the forest");
    predict->add_option("--forest-mtry", pred.params.forest.mtry,
                        "Features sampled per split (0 = all)");
    predict->add_flag("--forest-no-bootstrap", pred.forest_no_bootstrap,
                      "Train each tree on the full training split");
    predict->add_option("--gbt-rounds", pred.params.gbt.rounds, "Boosting rounds");
    predict->add_option("--gbt-depth", pred.params.gbt.max_depth, "Boosted-tree depth limit");
    predict->add_option("--gbt-shrinkage", pred.params.gbt.shrinkage, "Boosting learning rate");
    predict->add_option("--gbt-min-leaf", pred.params.gbt.min_leaf,
                        "Minimum samples per boosted-tree leaf");
    predict->callback([&]() {
        pred.seed_given = opt_pseed->count() > 0;
        if (pred.data_path.empty() && pred.synthetic.empty()) {
            std::cerr << "error: predict needs --data or --synthetic\n";
            rc = kExitUsage;
            return;
        }
        rc = run_predict(pred);
    });

    // --- stats ------------------------------------------------------------
    StatsOptions sta;
    auto* stats = app.add_subcommand(
        "stats", "Repeated-measures ANOVA of one safety metric over the 3x3 design");
    stats->add_option("--metrics", sta.metrics_path, "Combined metrics CSV (or bare subject,warning,aggressiveness,value table)")
        ->required();
    stats->add_option("--metric", sta.metric, "Metric column to analyse (default: cpi)");
    stats->add_option("--out", sta.out_path, "ANOVA table CSV to write")->required();
    stats->callback([&]() { rc = run_stats(sta); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the usage message
        return kExitUsage;
    }
    return rc;
}
