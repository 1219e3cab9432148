// Command-line driver: synth -> preprocess -> train -> eval, plus ablation
// sweeps and report aggregation. Every command is a pure function of its
// effective config (flags over file over defaults), which is echoed into the
// run directory next to the outputs.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mov/config.hpp"
#include "mov/workflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mov;

namespace {

struct GlobalFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    int jobs = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;
};

RunConfig effective_config(const GlobalFlags& g) {
    RunConfig cfg;
    if (!g.config_path.empty()) cfg = load_run_config(g.config_path);
    if (g.seed_opt && g.seed_opt->count() > 0) cfg.seed = g.seed;
    if (g.out_opt && g.out_opt->count() > 0) cfg.out = g.out;
    if (g.jobs_opt && g.jobs_opt->count() > 0) cfg.jobs = g.jobs;
    return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Merges one command's summary into <out>/run.json.
void record_run(const std::string& out_dir, const std::string& command, json summary) {
    fs::create_directories(out_dir);
    fs::path path = fs::path(out_dir) / "run.json";
    json doc = json::object();
    if (fs::exists(path)) {
        std::ifstream in(path);
        doc = json::parse(in, nullptr, false);
        if (doc.is_discarded()) doc = json::object();
    }
    doc[command] = std::move(summary);
    std::ofstream o(path);
    o << doc.dump(2) << "\n";
}

void echo_config(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    save_run_config(RunPaths{cfg.out}.config_echo(), cfg);
}

std::string round1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

int cmd_synth(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    RunPaths paths{cfg.out};
    run_synth(cfg, paths);
    echo_config(cfg);
    DatasetManifest m = load_manifest(paths.manifest());
    json s;
    s["classes"] = cfg.data.n_classes;
    s["base_classes"] = cfg.data.n_base;
    s["records"] = m.records.size();
    s["wall_seconds"] = seconds_since(t0);
    record_run(cfg.out, "synth", s);
    std::cout << "synth: " << m.records.size() << " records under " << paths.data() << "\n";
    return 0;
}

int cmd_preprocess(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    RunPaths paths{cfg.out};
    run_preprocess(cfg, paths);
    echo_config(cfg);
    json s;
    s["cache"] = paths.cache();
    s["eval_views"] = cfg.infer.views(cfg.model);
    s["jobs"] = cfg.jobs;
    s["wall_seconds"] = seconds_since(t0);
    record_run(cfg.out, "preprocess", s);
    std::cout << "preprocess: cache ready under " << paths.cache() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    RunPaths paths{cfg.out};
    TrainOutcome outcome = run_train(cfg, paths);
    json s;
    s["align_final_loss"] = outcome.align.curve.back().loss;
    s["train_final_loss"] = outcome.base.curve.back().loss;
    s["train_steps"] = outcome.base.curve.size();
    s["checkpoint"] = paths.checkpoint();
    s["wall_seconds"] = seconds_since(t0);
    record_run(cfg.out, "train", s);
    std::cout << "train: final loss " << outcome.base.curve.back().loss << " after "
              << outcome.base.curve.size() << " steps -> " << paths.checkpoint() << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const RunPaths& paths, const InferenceConfig& icfg,
             const std::string& report_path, const std::string& plot_data) {
    auto t0 = std::chrono::steady_clock::now();
    std::string json_path = report_path.empty() ? paths.report_json() : report_path;
    std::string csv_path = json_path;
    if (csv_path.size() > 5 && csv_path.substr(csv_path.size() - 5) == ".json") {
        csv_path = csv_path.substr(0, csv_path.size() - 5) + ".csv";
    } else {
        csv_path += ".csv";
    }
    EvalReport report = run_eval(cfg, paths, icfg, json_path, csv_path);

    if (!plot_data.empty()) {
        // Fig-style per-class novel deltas: this wiring against the frozen
        // video-only baseline of the same checkpoint.
        InferenceConfig baseline = icfg;
        baseline.fusion_mode = "video-only";
        fs::path side = fs::path(json_path).parent_path();
        EvalReport ref = run_eval(cfg, paths, baseline, (side / "report_video_only.json").string(),
                                  (side / "report_video_only.csv").string());
        write_delta_csv(plot_data, report, ref);
    }

    json s;
    s["base_acc"] = report.base_acc;
    s["novel_acc"] = report.novel_acc;
    s["harmonic_mean"] = report.hmean;
    s["fusion_mode"] = icfg.fusion_mode;
    s["report"] = json_path;
    s["wall_seconds"] = seconds_since(t0);
    record_run(cfg.out, "eval", s);
    std::cout << "eval[" << icfg.fusion_mode << "]: base " << round1(report.base_acc) << " novel "
              << round1(report.novel_acc) << " hmean " << round1(report.hmean) << "\n";
    return 0;
}

int cmd_ablate(const RunConfig& cfg, const std::string& axis) {
    auto t0 = std::chrono::steady_clock::now();
    RunPaths main_paths{cfg.out};
    fs::path ab_dir = fs::path(cfg.out) / ("ablate_" + axis);
    fs::create_directories(ab_dir);
    std::ofstream table(ab_dir / "table.csv");
    table << axis << ",base_acc,novel_acc,harmonic_mean\n";

    auto eval_point = [&](const std::string& label, const InferenceConfig& icfg,
                          const RunPaths& paths) {
        fs::path dir = ab_dir / label;
        fs::create_directories(dir);
        EvalReport r = run_eval(cfg, paths, icfg, (dir / "report.json").string(),
                                (dir / "report.csv").string());
        table << label << "," << round1(r.base_acc) << "," << round1(r.novel_acc) << ","
              << round1(r.hmean) << "\n";
    };

    if (axis == "fusion_mode") {
        for (const std::string mode :
             {"video-only", "aux-only", "score-fusion", "cross-attention"}) {
            InferenceConfig icfg = cfg.infer;
            icfg.fusion_mode = mode;
            eval_point(mode, icfg, main_paths);
        }
    } else if (axis == "tau_v") {
        for (double tau_v : {0.01, 0.003, 0.001, 0.0003, 0.0001}) {
            InferenceConfig icfg = cfg.infer;
            icfg.tau_v = tau_v;
            char label[32];
            std::snprintf(label, sizeof(label), "%g", tau_v);
            eval_point(label, icfg, main_paths);
        }
    } else if (axis == "beta") {
        for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            InferenceConfig icfg = cfg.infer;
            icfg.beta = beta;
            char label[32];
            std::snprintf(label, sizeof(label), "%g", beta);
            eval_point(label, icfg, main_paths);
        }
    } else if (axis == "trainable_layers" || axis == "alpha") {
        // Training axes retrain per grid point; the preprocessed cache and
        // the dataset are shared across points.
        std::vector<std::string> points;
        if (axis == "trainable_layers") {
            for (const std::string k : {"1", "3", "6", "9", "all"}) {
                if (k == "all" || std::stoi(k) <= cfg.model.vit.layers) {
                    points.push_back(k);
                } else {
                    std::cerr << "ablate: skipping trainable_layers=" << k
                              << " (tower depth " << cfg.model.vit.layers << ")\n";
                }
            }
        } else {
            points = {"0", "0.25", "0.5", "0.75", "1"};
        }
        for (const auto& point : points) {
            RunConfig sub = cfg;
            if (axis == "trainable_layers") {
                sub.train.trainable_layers = point;
            } else {
                sub.train.alpha = std::stod(point);
            }
            sub.out = (ab_dir / point).string();
            RunPaths paths{sub.out};
            paths.manifest_override = main_paths.manifest();
            paths.data_override = main_paths.data();
            paths.cache_override = main_paths.cache();
            run_train(sub, paths);
            InferenceConfig icfg = sub.infer;
            EvalReport r = run_eval(sub, paths, icfg, (fs::path(sub.out) / "report.json").string(),
                                    (fs::path(sub.out) / "report.csv").string());
            table << point << "," << round1(r.base_acc) << "," << round1(r.novel_acc) << ","
                  << round1(r.hmean) << "\n";
        }
    } else {
        throw CLI::ValidationError("ablate", "unknown axis: " + axis);
    }
    if (!table) throw std::runtime_error("failed to write the ablation table");
    json s;
    s["axis"] = axis;
    s["table"] = (ab_dir / "table.csv").string();
    s["wall_seconds"] = seconds_since(t0);
    record_run(cfg.out, "ablate_" + axis, s);
    std::cout << "ablate[" << axis << "]: table at " << (ab_dir / "table.csv").string() << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path,
               const std::string& delta_path) {
    std::ofstream csv(out_path);
    csv << "run,base_acc,novel_acc,harmonic_mean,entropy_video,entropy_aux\n";
    std::vector<EvalReport> loaded;
    std::vector<std::string> loaded_names;
    int errors = 0;
    for (const auto& dir : run_dirs) {
        std::string path = (fs::path(dir) / "report.json").string();
        try {
            EvalReport r = read_report(path);
            double recomputed = harmonic_mean(r.base_acc, r.novel_acc);
            if (std::fabs(recomputed - r.hmean) > 0.05) {
                throw std::runtime_error("stored harmonic mean disagrees with its inputs");
            }
            csv << dir << "," << round1(r.base_acc) << "," << round1(r.novel_acc) << ","
                << round1(recomputed) << "," << round1(r.entropy_video) << ","
                << round1(r.entropy_aux) << "\n";
            loaded.push_back(std::move(r));
            loaded_names.push_back(dir);
        } catch (const std::exception& e) {
            ++errors;
            std::cerr << "report: " << dir << ": " << e.what() << "\n";
        }
    }
    if (!csv) throw std::runtime_error("failed to write the summary: " + out_path);
    if (!delta_path.empty()) {
        if (loaded.size() != 2) {
            throw std::runtime_error("--delta needs exactly two readable runs");
        }
        write_delta_csv(delta_path, loaded[0], loaded[1]);
    }
    std::cout << "report: " << loaded.size() << " run(s) -> " << out_path;
    if (errors > 0) std::cout << " (" << errors << " failed)";
    std::cout << "\n";
    return errors == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-vocabulary multimodal video classification workbench"};
    app.require_subcommand(1);

    GlobalFlags g;
    app.add_option("--config", g.config_path, "Run configuration file (INI sections)");
    g.seed_opt = app.add_option("--seed", g.seed, "Master seed override");
    g.out_opt = app.add_option("--out", g.out, "Run directory override");
    g.jobs_opt = app.add_option("--jobs", g.jobs, "Worker threads for preprocessing");

    auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
    int classes = 0, per_class = 0;
    auto* classes_opt = synth->add_option("--classes", classes, "Total class count");
    auto* per_class_opt =
        synth->add_option("--per-class", per_class, "Training samples per base class");

    auto* preprocess =
        app.add_subcommand("preprocess", "Decode media into cached model-ready views");

    auto* train = app.add_subcommand("train", "Alignment pretraining plus base fine-tuning");

    auto* eval = app.add_subcommand("eval", "Score a checkpoint on base and novel splits");
    std::string ckpt_flag, manifest_flag, report_flag, plot_flag, mode_flag;
    double tau_v_flag = 0.0, beta_flag = 0.0;
    auto* ckpt_opt = eval->add_option("--checkpoint", ckpt_flag, "Checkpoint directory");
    auto* manifest_opt = eval->add_option("--manifest", manifest_flag, "Dataset manifest path");
    eval->add_option("--report", report_flag, "Report JSON output path");
    eval->add_option("--plot-data", plot_flag,
                     "Write sorted per-class novel deltas vs the video-only baseline (CSV)");
    auto* mode_opt = eval->add_option("--fusion-mode", mode_flag,
                                      "cross-attention | video-only | aux-only | score-fusion");
    auto* tau_v_opt = eval->add_option("--tau-v", tau_v_flag, "Novel video-path temperature");
    auto* beta_opt = eval->add_option("--beta", beta_flag, "Auxiliary-path weight");

    auto* ablate = app.add_subcommand("ablate", "Sweep one axis and tabulate the results");
    std::string axis;
    ablate->add_option("--axis", axis, "trainable_layers | fusion_mode | tau_v | alpha | beta")
        ->required();

    auto* report = app.add_subcommand("report", "Aggregate run reports into a summary CSV");
    std::vector<std::string> run_dirs;
    std::string summary_path = "summary.csv", delta_path;
    report->add_option("runs", run_dirs, "Run directories containing report.json")->required();
    report->add_option("--summary", summary_path, "Summary CSV path");
    report->add_option("--delta", delta_path,
                       "Per-class novel delta CSV (needs exactly two runs)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) return cmd_report(run_dirs, summary_path, delta_path);

        RunConfig cfg = effective_config(g);
        if (synth->parsed()) {
            if (classes_opt->count() > 0) cfg.data.n_classes = classes;
            if (per_class_opt->count() > 0) cfg.data.train_per_class = per_class;
            return cmd_synth(cfg);
        }
        if (preprocess->parsed()) return cmd_preprocess(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (eval->parsed()) {
            RunPaths paths{cfg.out};
            if (ckpt_opt->count() > 0) paths.checkpoint_override = ckpt_flag;
            if (manifest_opt->count() > 0) paths.manifest_override = manifest_flag;
            InferenceConfig icfg = cfg.infer;
            if (mode_opt->count() > 0) icfg.fusion_mode = mode_flag;
            if (tau_v_opt->count() > 0) icfg.tau_v = tau_v_flag;
            if (beta_opt->count() > 0) icfg.beta = beta_flag;
            return cmd_eval(cfg, paths, icfg, report_flag, plot_flag);
        }
        if (ablate->parsed()) return cmd_ablate(cfg, axis);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
