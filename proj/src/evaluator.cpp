#include "mov/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "mov/fusion.hpp"

#include "json.hpp"

using nlohmann::json;

namespace mov {

void InferenceConfig::validate() const {
    if (tau <= 0.0 || tau_v <= 0.0 || tau_x <= 0.0) {
        throw std::invalid_argument("temperatures must be positive");
    }
    if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("beta must lie in [0,1]");
    if (views_video < 1 || views_audio < 1) throw std::invalid_argument("need at least one view");
    if (fusion_mode != "cross-attention" && fusion_mode != "video-only" &&
        fusion_mode != "aux-only" && fusion_mode != "score-fusion") {
        throw std::invalid_argument("unknown fusion mode: " + fusion_mode);
    }
}

namespace {

Tensor cosine_sims(const Tensor& feat, const Tensor& table) {
    int classes = table.extent(0), d = table.extent(1);
    Tensor logits({classes});
    for (int c = 0; c < classes; ++c) {
        Tensor row({d});
        for (int j = 0; j < d; ++j) row.at(j) = table.at(c, j);
        logits.at(c) = cosine_similarity(feat, row);
    }
    return logits;
}

ProbabilityVector mix(const ProbabilityVector& a, const ProbabilityVector& b, double wa) {
    Tensor out({a.size()});
    for (int i = 0; i < a.size(); ++i) out.at(i) = wa * a[i] + (1.0 - wa) * b[i];
    return ProbabilityVector(out);
}

}  // namespace

ProbabilityVector predict_base(const Tensor& v_m, const EmbeddingTable& base_table, double tau) {
    if (base_table.size() == 0) throw std::invalid_argument("class table is empty");
    if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");
    return softmax(cosine_sims(v_m, base_table.embeddings), tau);
}

ProbabilityVector predict_novel(const Tensor& x_m, const Tensor& v_pooled,
                                const EmbeddingTable& novel_table, const InferenceConfig& cfg) {
    cfg.validate();
    if (novel_table.size() == 0) throw std::invalid_argument("class table is empty");
    ProbabilityVector p_x = softmax(cosine_sims(x_m, novel_table.embeddings), cfg.tau_x);
    ProbabilityVector p_v = softmax(cosine_sims(v_pooled, novel_table.embeddings), cfg.tau_v);
    return mix(p_x, p_v, cfg.beta);
}

ProbabilityVector aggregate_views(const std::vector<ProbabilityVector>& views) {
    if (views.empty()) throw std::invalid_argument("no views to aggregate");
    int n = views[0].size();
    Tensor sum({n});
    for (const auto& v : views) {
        if (v.size() != n) throw std::invalid_argument("views disagree on class count");
        for (int i = 0; i < n; ++i) sum.at(i) += v[i];
    }
    for (int i = 0; i < n; ++i) sum.at(i) /= static_cast<double>(views.size());
    return ProbabilityVector(sum);
}

double harmonic_mean(double a, double b) {
    if (a < 0.0 || b < 0.0) throw std::invalid_argument("accuracies must be non-negative");
    if (a == 0.0 && b == 0.0) return 0.0;
    return 2.0 * a * b / (a + b);
}

namespace {

struct SplitTally {
    int correct = 0;
    std::map<std::string, int> class_correct, class_total;

    void add(const std::string& name, bool ok) {
        ++class_total[name];
        if (ok) {
            ++correct;
            ++class_correct[name];
        }
    }

    double accuracy(int total) const {
        return total == 0 ? 0.0 : 100.0 * correct / static_cast<double>(total);
    }

    std::map<std::string, double> per_class() const {
        std::map<std::string, double> out;
        for (const auto& [name, total] : class_total) {
            auto it = class_correct.find(name);
            int c = it == class_correct.end() ? 0 : it->second;
            out[name] = 100.0 * c / static_cast<double>(total);
        }
        return out;
    }
};

// The per-view feature pair each fusion mode scores with. Base classes use
// `base_feat` at tau; novel classes mix `aux_feat` (at tau_x, weight beta)
// with `video_feat` (at tau_v).
struct ModeFeatures {
    Tensor base_feat;
    Tensor aux_feat;
    Tensor video_feat;
    double beta = 0.25;
};

ModeFeatures mode_features(const FusedFeatures& f, const InferenceConfig& cfg) {
    ModeFeatures m;
    m.beta = cfg.beta;
    if (cfg.fusion_mode == "cross-attention") {
        m.base_feat = f.v_m;
        m.aux_feat = f.x_m;
        m.video_feat = f.v_pooled;
    } else if (cfg.fusion_mode == "video-only") {
        m.base_feat = f.v_pooled;
        m.aux_feat = f.v_pooled;
        m.video_feat = f.v_pooled;
        m.beta = 0.0;
    } else if (cfg.fusion_mode == "aux-only") {
        Tensor x_pooled = mean_rows(f.x_t);
        m.base_feat = x_pooled;
        m.aux_feat = x_pooled;
        m.video_feat = x_pooled;
        m.beta = 1.0;
    } else {  // score-fusion: temporally fused features, no cross-attention
        m.base_feat = mean_rows(f.v_t);
        m.aux_feat = mean_rows(f.x_t);
        m.video_feat = f.v_pooled;
    }
    return m;
}

}  // namespace

EvalReport evaluate(ParamSet& ps, const ModelConfig& mc, const InferenceConfig& cfg,
                    const std::vector<EvalSample>& base_set, const EmbeddingTable& base_table,
                    const std::vector<EvalSample>& novel_set, const EmbeddingTable& novel_table) {
    mc.validate();
    cfg.validate();
    {
        std::set<std::string> base_names(base_table.names.begin(), base_table.names.end());
        for (const auto& name : novel_table.names) {
            if (base_names.count(name)) {
                throw std::invalid_argument("class appears in both splits: " + name);
            }
        }
    }
    for (const auto& s : base_set) {
        if (s.label < 0 || s.label >= base_table.size()) {
            throw std::invalid_argument("base label out of range");
        }
        if (s.views.empty()) throw std::invalid_argument("sample has no views");
    }
    for (const auto& s : novel_set) {
        if (s.label < 0 || s.label >= novel_table.size()) {
            throw std::invalid_argument("novel label out of range");
        }
        if (s.views.empty()) throw std::invalid_argument("sample has no views");
    }

    EvalReport report;
    SplitTally base_tally, novel_tally;

    for (const auto& s : base_set) {
        std::vector<ProbabilityVector> view_probs;
        for (const auto& view : s.views) {
            ModeFeatures m = mode_features(model_forward(ps, mc, view), cfg);
            view_probs.push_back(softmax(cosine_sims(m.base_feat, base_table.embeddings), cfg.tau));
        }
        ProbabilityVector p = aggregate_views(view_probs);
        base_tally.add(base_table.names[s.label], p.argmax() == s.label);
    }

    double ent_video = 0.0, ent_aux = 0.0;
    for (const auto& s : novel_set) {
        std::vector<ProbabilityVector> combined, path_v, path_x;
        for (const auto& view : s.views) {
            ModeFeatures m = mode_features(model_forward(ps, mc, view), cfg);
            ProbabilityVector p_x =
                softmax(cosine_sims(m.aux_feat, novel_table.embeddings), cfg.tau_x);
            ProbabilityVector p_v =
                softmax(cosine_sims(m.video_feat, novel_table.embeddings), cfg.tau_v);
            combined.push_back(mix(p_x, p_v, m.beta));
            path_x.push_back(p_x);
            path_v.push_back(p_v);
        }
        ProbabilityVector p = aggregate_views(combined);
        novel_tally.add(novel_table.names[s.label], p.argmax() == s.label);
        ent_video += entropy(aggregate_views(path_v));
        ent_aux += entropy(aggregate_views(path_x));
    }

    report.base_acc = base_tally.accuracy(static_cast<int>(base_set.size()));
    report.novel_acc = novel_tally.accuracy(static_cast<int>(novel_set.size()));
    report.hmean = harmonic_mean(report.base_acc, report.novel_acc);
    report.per_class_base = base_tally.per_class();
    report.per_class_novel = novel_tally.per_class();
    if (!novel_set.empty()) {
        report.entropy_video = ent_video / static_cast<double>(novel_set.size());
        report.entropy_aux = ent_aux / static_cast<double>(novel_set.size());
    }
    return report;
}

std::vector<std::pair<std::string, double>> per_class_delta(
    const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("class sets differ");
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [name, acc] : a) {
        auto it = b.find(name);
        if (it == b.end()) throw std::invalid_argument("class missing from reference: " + name);
        out.emplace_back(name, acc - it->second);
    }
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    return out;
}

void write_report(const std::string& path, const EvalReport& report) {
    json j;
    j["schema"] = 1;
    j["base_acc"] = report.base_acc;
    j["novel_acc"] = report.novel_acc;
    j["harmonic_mean"] = report.hmean;
    j["per_class_base"] = report.per_class_base;
    j["per_class_novel"] = report.per_class_novel;
    j["entropy_video"] = report.entropy_video;
    j["entropy_aux"] = report.entropy_aux;
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed to write the report: " + path);
}

EvalReport read_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("report not found: " + path);
    json j = json::parse(in);
    if (j.at("schema") != 1) throw std::invalid_argument("unknown report schema");
    EvalReport r;
    r.base_acc = j.at("base_acc");
    r.novel_acc = j.at("novel_acc");
    r.hmean = j.at("harmonic_mean");
    r.per_class_base = j.at("per_class_base").get<std::map<std::string, double>>();
    r.per_class_novel = j.at("per_class_novel").get<std::map<std::string, double>>();
    r.entropy_video = j.at("entropy_video");
    r.entropy_aux = j.at("entropy_aux");
    return r;
}

}  // namespace mov
