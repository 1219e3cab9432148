#include "mov/workflow.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "mov/rng.hpp"

namespace fs = std::filesystem;

namespace mov {

namespace {

std::map<std::string, int> label_index(const std::vector<std::string>& classes) {
    std::map<std::string, int> idx;
    for (std::size_t i = 0; i < classes.size(); ++i) idx[classes[i]] = static_cast<int>(i);
    return idx;
}

void write_curve_csv(const std::string& path, const std::vector<StepRecord>& curve) {
    std::ofstream csv(path);
    csv << "step,lr,loss\n";
    char line[96];
    for (const auto& r : curve) {
        std::snprintf(line, sizeof(line), "%ld,%.17g,%.17g\n", r.step, r.lr, r.loss);
        csv << line;
    }
    if (!csv) throw std::runtime_error("failed to write the curve: " + path);
}

}  // namespace

std::uint64_t effective_align_seed(const RunConfig& cfg) {
    return cfg.align.seed != 0 ? cfg.align.seed : derive_seed(cfg.seed, "align");
}

std::uint64_t effective_train_seed(const RunConfig& cfg) {
    return cfg.train.seed != 0 ? cfg.train.seed : derive_seed(cfg.seed, "train");
}

std::uint64_t preprocess_seed(const RunConfig& cfg) {
    return derive_seed(cfg.seed, "preprocess");
}

std::uint64_t effective_data_seed(const RunConfig& cfg) {
    return cfg.data.seed != 0 ? cfg.data.seed : derive_seed(cfg.seed, "data");
}

void run_synth(const RunConfig& cfg, const RunPaths& paths) {
    cfg.validate();
    fs::create_directories(paths.root);
    GenerateConfig g = cfg.data;
    g.seed = effective_data_seed(cfg);
    generate_dataset(g, paths.data());
}

void run_preprocess(const RunConfig& cfg, const RunPaths& paths) {
    cfg.validate();
    DatasetManifest m = load_manifest(paths.manifest());
    preprocess_manifest(m, paths.data(), cfg.model, cfg.infer.views(cfg.model),
                        preprocess_seed(cfg), paths.cache(), cfg.jobs);
}

TrainOutcome run_train(const RunConfig& cfg, const RunPaths& paths) {
    cfg.validate();
    const ModelConfig& mc = cfg.model;
    DatasetManifest m = load_manifest(paths.manifest());
    verify_cache(paths.cache(), mc, cfg.infer.views(mc), preprocess_seed(cfg));

    ParamSet ps;
    init_model(ps, mc, derive_seed(cfg.seed, "init"));
    auto base_classes = m.base_classes();
    EmbeddingTable base_table =
        build_embedding_table(base_classes, PromptSet::default_set(), ps, kTextEnc, mc.text);
    auto base_idx = label_index(base_classes);

    std::vector<SampleView> train_views;
    std::vector<int> train_labels;
    for (const auto* r : m.split_records("base-train")) {
        train_views.push_back(load_train_view(paths.cache(), mc, r->id));
        train_labels.push_back(base_idx.at(r->class_name));
    }

    TrainOutcome out;
    AlignConfig ac = cfg.align;
    ac.seed = effective_align_seed(cfg);
    out.align = train_alignment(ps, mc, ac, train_views, train_labels, base_table.embeddings);

    // The aligned video tower becomes the frozen backbone; the auxiliary
    // tower starts from the same weights.
    instantiate_aux_from_video(ps);
    std::vector<TrainSample> samples =
        prepare_train_samples(ps, mc, train_views, train_labels);

    TrainConfig tc = cfg.train;
    tc.seed = effective_train_seed(cfg);
    out.base = train_base(ps, mc, tc, samples, base_table.embeddings);

    save_checkpoint(paths.checkpoint(), ps, mc, tc, out.base.curve);
    write_curve_csv(paths.align_curve(), out.align.curve);
    save_run_config(paths.config_echo(), cfg);
    return out;
}

EvalReport run_eval(const RunConfig& cfg, const RunPaths& paths, const InferenceConfig& icfg,
                    const std::string& report_json_path, const std::string& report_csv_path) {
    cfg.validate();
    icfg.validate();
    Checkpoint ck = load_checkpoint(paths.checkpoint());
    const ModelConfig& mc = ck.model;
    DatasetManifest m = load_manifest(paths.manifest());
    verify_cache(paths.cache(), mc, cfg.infer.views(mc), preprocess_seed(cfg));

    auto base_classes = m.base_classes();
    auto novel_classes = m.novel_classes();
    EmbeddingTable base_table = build_embedding_table(base_classes, PromptSet::default_set(),
                                                      ck.params, kTextEnc, mc.text);
    EmbeddingTable novel_table = build_embedding_table(novel_classes, PromptSet::default_set(),
                                                       ck.params, kTextEnc, mc.text);
    auto base_idx = label_index(base_classes);
    auto novel_idx = label_index(novel_classes);

    // Views were cached under the run's view count; a different icfg view
    // count would silently change what "a view" means, so pin it.
    int views = cfg.infer.views(mc);
    std::vector<EvalSample> base_set, novel_set;
    for (const auto* r : m.split_records("base-test")) {
        EvalSample s;
        s.views = load_eval_views(paths.cache(), mc, r->id, views);
        s.label = base_idx.at(r->class_name);
        base_set.push_back(std::move(s));
    }
    for (const auto* r : m.split_records("novel-test")) {
        EvalSample s;
        s.views = load_eval_views(paths.cache(), mc, r->id, views);
        s.label = novel_idx.at(r->class_name);
        novel_set.push_back(std::move(s));
    }

    EvalReport report = evaluate(ck.params, mc, icfg, base_set, base_table, novel_set, novel_table);
    write_report(report_json_path, report);

    std::ofstream csv(report_csv_path);
    csv << "fusion_mode,tau_v,beta,base_acc,novel_acc,harmonic_mean,entropy_video,entropy_aux\n";
    char line[200];
    std::snprintf(line, sizeof(line), "%s,%g,%g,%.1f,%.1f,%.1f,%.4f,%.4f\n",
                  icfg.fusion_mode.c_str(), icfg.tau_v, icfg.beta, report.base_acc,
                  report.novel_acc, report.hmean, report.entropy_video, report.entropy_aux);
    csv << line;
    if (!csv) throw std::runtime_error("failed to write the report CSV: " + report_csv_path);
    return report;
}

void write_delta_csv(const std::string& path, const EvalReport& a, const EvalReport& b) {
    auto deltas = per_class_delta(a.per_class_novel, b.per_class_novel);
    std::ofstream csv(path);
    csv << "class,delta_pct\n";
    char line[160];
    for (const auto& [name, delta] : deltas) {
        std::snprintf(line, sizeof(line), "%s,%.1f\n", name.c_str(), delta);
        csv << line;
    }
    if (!csv) throw std::runtime_error("failed to write the delta CSV: " + path);
}

}  // namespace mov
