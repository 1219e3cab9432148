#pragma once

#include <string>
#include <vector>

#include "mov/config.hpp"
#include "mov/evaluator.hpp"
#include "mov/pipeline.hpp"
#include "mov/trainer.hpp"

namespace mov {

// Fixed layout of a run directory. Every stage reads its inputs from and
// writes its outputs under one root so a run is a self-contained artifact.
struct RunPaths {
    std::string root;
    // Optional redirects so several runs can share one dataset and cache
    // (ablation sweeps) or score a checkpoint produced elsewhere.
    std::string data_override;
    std::string manifest_override;
    std::string cache_override;
    std::string checkpoint_override;

    RunPaths() = default;
    explicit RunPaths(std::string run_root) : root(std::move(run_root)) {}

    std::string data() const { return data_override.empty() ? root + "/data" : data_override; }
    std::string manifest() const {
        return manifest_override.empty() ? data() + "/manifest.jsonl" : manifest_override;
    }
    std::string cache() const { return cache_override.empty() ? root + "/cache" : cache_override; }
    std::string checkpoint() const {
        return checkpoint_override.empty() ? root + "/checkpoint" : checkpoint_override;
    }
    std::string align_curve() const { return root + "/align_curve.csv"; }
    std::string config_echo() const { return root + "/config.ini"; }
    std::string report_json() const { return root + "/report.json"; }
    std::string report_csv() const { return root + "/report.csv"; }
};

// Phase seeds derive from the master seed unless the config pins them.
std::uint64_t effective_align_seed(const RunConfig& cfg);
std::uint64_t effective_train_seed(const RunConfig& cfg);
std::uint64_t preprocess_seed(const RunConfig& cfg);
std::uint64_t effective_data_seed(const RunConfig& cfg);

void run_synth(const RunConfig& cfg, const RunPaths& paths);
void run_preprocess(const RunConfig& cfg, const RunPaths& paths);

struct TrainOutcome {
    TrainResult align;
    TrainResult base;
};

// Alignment pretraining, auxiliary-tower instantiation, base fine-tuning,
// checkpoint write. Requires synth and preprocess outputs in place.
TrainOutcome run_train(const RunConfig& cfg, const RunPaths& paths);

// Scores a checkpoint under the given inference settings and writes the
// JSON report plus a one-line CSV summary. The checkpoint and manifest come
// from `paths`; `icfg` usually equals cfg.infer but ablations vary it.
EvalReport run_eval(const RunConfig& cfg, const RunPaths& paths, const InferenceConfig& icfg,
                    const std::string& report_json_path, const std::string& report_csv_path);

// Sorted per-class novel-accuracy deltas (run a minus run b) as CSV.
void write_delta_csv(const std::string& path, const EvalReport& a, const EvalReport& b);

}  // namespace mov
