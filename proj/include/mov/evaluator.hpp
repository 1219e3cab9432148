#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mov/encoders.hpp"
#include "mov/model.hpp"
#include "mov/nn.hpp"

namespace mov {

// Inference settings. Base classes are scored from the fused video feature;
// novel classes mix a fine-tuned auxiliary path with a frozen-backbone video
// path whose sharper temperature compensates for its flatter similarities.
struct InferenceConfig {
    double tau = 0.01;    // base-class temperature
    double tau_v = 0.003; // novel video path
    double tau_x = 0.01;  // novel auxiliary path (flow or audio)
    double beta = 0.25;   // weight of the auxiliary path on novel classes
    int views_video = 2;  // temporal views for video/flow evaluation
    int views_audio = 4;  // temporal crops for audio evaluation
    // Wiring ablation: "cross-attention" (full model), "video-only",
    // "aux-only", or "score-fusion" (temporally fused but not cross-attended).
    std::string fusion_mode = "cross-attention";

    int views(const ModelConfig& mc) const { return mc.audio_aux() ? views_audio : views_video; }
    void validate() const;
};

ProbabilityVector predict_base(const Tensor& v_m, const EmbeddingTable& base_table, double tau);
ProbabilityVector predict_novel(const Tensor& x_m, const Tensor& v_pooled,
                                const EmbeddingTable& novel_table, const InferenceConfig& cfg);
ProbabilityVector aggregate_views(const std::vector<ProbabilityVector>& views);

// 2ab/(a+b) with the empty case pinned to zero.
double harmonic_mean(double a, double b);

struct EvalSample {
    std::vector<SampleView> views;
    int label = 0;  // row in the split's embedding table
};

struct EvalReport {
    double base_acc = 0.0;   // percent
    double novel_acc = 0.0;
    double hmean = 0.0;
    std::map<std::string, double> per_class_base;
    std::map<std::string, double> per_class_novel;
    double entropy_video = 0.0;  // mean entropy of the novel video path
    double entropy_aux = 0.0;    // mean entropy of the novel auxiliary path
};

EvalReport evaluate(ParamSet& ps, const ModelConfig& mc, const InferenceConfig& cfg,
                    const std::vector<EvalSample>& base_set, const EmbeddingTable& base_table,
                    const std::vector<EvalSample>& novel_set, const EmbeddingTable& novel_table);

// Per-class accuracy differences a - b, sorted descending (ties by name).
std::vector<std::pair<std::string, double>> per_class_delta(
    const std::map<std::string, double>& a, const std::map<std::string, double>& b);

void write_report(const std::string& path, const EvalReport& report);
EvalReport read_report(const std::string& path);

}  // namespace mov
