#include "mov/trainer.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mov/nn.hpp"
#include "mov/optim.hpp"
#include "mov/rng.hpp"

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mov {

void TrainConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must lie in [0,1]");
    if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
    if (batch_size < 1 || epochs < 1) throw std::invalid_argument("bad batch size or epochs");
    if (base_lr <= 0.0 || weight_decay < 0.0) throw std::invalid_argument("bad optimizer settings");
    if (trainable_layers != "all") {
        int k = 0;
        auto [p, ec] = std::from_chars(trainable_layers.data(),
                                       trainable_layers.data() + trainable_layers.size(), k);
        if (ec != std::errc{} || p != trainable_layers.data() + trainable_layers.size() || k < 1) {
            throw std::invalid_argument("trainable_layers must be a positive count or \"all\"");
        }
    }
}

void AlignConfig::validate() const {
    if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
    if (batch_size < 1 || epochs < 1) throw std::invalid_argument("bad batch size or epochs");
    if (base_lr <= 0.0 || weight_decay < 0.0) throw std::invalid_argument("bad optimizer settings");
    if (frames_per_clip < 1) throw std::invalid_argument("need at least one frame per clip");
}

int resolve_trainable_layers(const std::string& value, int depth) {
    if (value == "all") return -1;
    int k = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), k);
    if (ec != std::errc{} || p != value.data() + value.size()) {
        throw std::invalid_argument("trainable_layers must be a positive count or \"all\"");
    }
    if (k < 1 || k > depth) {
        throw std::invalid_argument("trainable_layers exceeds the tower depth");
    }
    return k;
}

namespace {

// enc.aux.block<i>.<rest> -> i, or -1 for the tower's non-block parameters.
int aux_block_index(const std::string& name) {
    const std::string stem = std::string(kAuxEnc) + ".block";
    if (name.rfind(stem, 0) != 0) return -1;
    std::size_t start = stem.size();
    std::size_t dot = name.find('.', start);
    if (dot == std::string::npos || dot == start) return -1;
    int idx = 0;
    auto [p, ec] = std::from_chars(name.data() + start, name.data() + dot, idx);
    if (ec != std::errc{} || p != name.data() + dot) return -1;
    return idx;
}

bool has_prefix(const std::string& name, const char* prefix) {
    return name.rfind(std::string(prefix) + ".", 0) == 0;
}

}  // namespace

FreezePlan build_freeze_plan(const ParamSet& ps, const ModelConfig& mc,
                             const std::string& trainable_layers) {
    int k = resolve_trainable_layers(trainable_layers, mc.vit.layers);
    FreezePlan plan;
    for (const auto& name : ps.names()) {
        bool t;
        if (has_prefix(name, kVideoEnc) || has_prefix(name, kTextEnc)) {
            t = false;
        } else if (has_prefix(name, kAuxEnc)) {
            if (k < 0) {
                t = true;
            } else {
                int idx = aux_block_index(name);
                t = idx >= 0 && idx >= mc.vit.layers - k;
            }
        } else if (name.rfind("head.", 0) == 0) {
            t = true;
        } else {
            throw std::invalid_argument("parameter outside the known namespaces: " + name);
        }
        plan.trainable[name] = t;
    }
    return plan;
}

void apply_freeze_plan(ParamSet& ps, const FreezePlan& plan) {
    for (const auto& name : ps.names()) {
        auto it = plan.trainable.find(name);
        if (it == plan.trainable.end()) {
            throw std::invalid_argument("freeze plan does not cover parameter " + name);
        }
        ps.set_trainable(name, it->second);
    }
}

std::vector<TrainSample> prepare_train_samples(ParamSet& ps, const ModelConfig& mc,
                                               const std::vector<SampleView>& views,
                                               const std::vector<int>& labels) {
    if (views.size() != labels.size()) {
        throw std::invalid_argument("views and labels must line up");
    }
    std::vector<TrainSample> out;
    for (std::size_t i = 0; i < views.size(); ++i) {
        TrainSample s;
        s.view = views[i];
        s.video_tokens = video_tokens(ps, mc, views[i].video_chw);
        s.label = labels[i];
        out.push_back(std::move(s));
    }
    return out;
}

double mov_loss(const Tensor& v_m, const Tensor& x_m, const Tensor& class_embeddings,
                int label, double alpha, double tau) {
    if (class_embeddings.rank() != 2) throw std::invalid_argument("class table must be rank 2");
    int classes = class_embeddings.extent(0);
    if (label < 0 || label >= classes) throw std::invalid_argument("label out of range");
    auto ce_of = [&](const Tensor& feat) {
        Tensor logits({classes});
        for (int c = 0; c < classes; ++c) {
            Tensor row({class_embeddings.extent(1)});
            for (int j = 0; j < row.extent(0); ++j) row.at(j) = class_embeddings.at(c, j);
            logits.at(c) = cosine_similarity(feat, row);
        }
        return -std::log(std::max(softmax(logits, tau)[label], 1e-300));
    };
    return alpha * ce_of(v_m) + (1.0 - alpha) * ce_of(x_m);
}

Var mov_loss_graph(Graph& g, Var v_m, Var x_m, const Tensor& class_embeddings, int label,
                   double alpha, double tau) {
    Var ce_v = g.cross_entropy_temp(g.cosine_logits(v_m, class_embeddings), label, tau);
    Var ce_x = g.cross_entropy_temp(g.cosine_logits(x_m, class_embeddings), label, tau);
    return g.add(g.scale(ce_v, alpha), g.scale(ce_x, 1.0 - alpha));
}

namespace {

struct BatchPlan {
    long total_steps = 0;
    int n_batches = 0;
};

BatchPlan plan_batches(int n_samples, int batch_size, int epochs) {
    BatchPlan p;
    p.n_batches = (n_samples + batch_size - 1) / batch_size;
    p.total_steps = static_cast<long>(p.n_batches) * epochs;
    return p;
}

std::map<std::string, Tensor> snapshot_frozen(const ParamSet& ps) {
    std::map<std::string, Tensor> frozen;
    for (const auto& name : ps.names()) {
        if (!ps.trainable(name)) frozen[name] = ps.value(name);
    }
    return frozen;
}

void check_frozen(const ParamSet& ps, const std::map<std::string, Tensor>& frozen) {
    for (const auto& [name, before] : frozen) {
        if (!bitwise_equal(before, ps.value(name))) {
            throw std::logic_error("frozen parameter changed during training: " + name);
        }
    }
}

// Runs the shared optimization loop: build_batch_loss returns the scalar
// loss node for the given sample indices.
template <typename BatchLossFn>
TrainResult run_sgd(ParamSet& ps, int n_samples, int batch_size, int epochs, double base_lr,
                    double weight_decay, std::uint64_t seed, BatchLossFn&& build_batch_loss) {
    BatchPlan plan = plan_batches(n_samples, batch_size, epochs);
    TrainResult result;
    AdamWConfig opt;
    opt.weight_decay = weight_decay;
    long step = 0;
    std::vector<int> order(n_samples);
    for (int i = 0; i < n_samples; ++i) order[i] = i;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng rng(derive_seed(seed, "epoch", static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        for (int b = 0; b < plan.n_batches; ++b) {
            int lo = b * batch_size;
            int hi = std::min(n_samples, lo + batch_size);
            std::vector<int> batch(order.begin() + lo, order.begin() + hi);
            Graph g;
            Var total = nullptr;
            for (int idx : batch) {
                Var li = build_batch_loss(g, idx);
                total = total ? g.add(total, li) : li;
            }
            Var loss = g.scale(total, 1.0 / static_cast<double>(batch.size()));
            g.backward(loss);
            ++step;
            opt.lr = half_cosine_lr(base_lr, step - 1, plan.total_steps);
            adamw_step(ps, g.trainable_grads(), opt, step);
            result.curve.push_back({step, opt.lr, loss->value.at(0)});
        }
    }
    return result;
}

void check_labels(const std::vector<int>& labels, int classes) {
    for (int y : labels) {
        if (y < 0 || y >= classes) throw std::invalid_argument("label out of range");
    }
}

}  // namespace

TrainResult train_base(ParamSet& ps, const ModelConfig& mc, const TrainConfig& tc,
                       const std::vector<TrainSample>& samples, const Tensor& class_embeddings) {
    mc.validate();
    tc.validate();
    if (samples.empty()) throw std::invalid_argument("no training samples");
    if (class_embeddings.rank() != 2 || class_embeddings.extent(1) != mc.vit.d) {
        throw std::invalid_argument("class table must be [classes, d]");
    }
    {
        std::vector<int> labels;
        for (const auto& s : samples) labels.push_back(s.label);
        check_labels(labels, class_embeddings.extent(0));
    }
    apply_freeze_plan(ps, build_freeze_plan(ps, mc, tc.trainable_layers));
    auto frozen = snapshot_frozen(ps);

    auto batch_loss = [&](Graph& g, int idx) {
        const TrainSample& s = samples[idx];
        Var vt = g.constant(s.video_tokens);
        Var xt = aux_branch_graph(g, ps, mc, aux_tokens_graph(g, ps, mc, s.view));
        Var vtt = video_branch_graph(g, ps, mc, vt);
        Var vm = fuse_video_graph(g, ps, kFuseVideo, vtt, xt, mc.xhead);
        Var xm = fuse_auxiliary_graph(g, ps, kFuseAux, xt, vt, mc.xhead);
        return mov_loss_graph(g, vm, xm, class_embeddings, s.label, tc.alpha, tc.tau);
    };
    TrainResult result =
        run_sgd(ps, static_cast<int>(samples.size()), tc.batch_size, tc.epochs, tc.base_lr,
                tc.weight_decay, tc.seed, batch_loss);
    check_frozen(ps, frozen);
    return result;
}

TrainResult train_alignment(ParamSet& ps, const ModelConfig& mc, const AlignConfig& ac,
                            const std::vector<SampleView>& views, const std::vector<int>& labels,
                            const Tensor& class_embeddings) {
    mc.validate();
    ac.validate();
    if (views.empty()) throw std::invalid_argument("no training samples");
    if (views.size() != labels.size()) throw std::invalid_argument("views and labels must line up");
    check_labels(labels, class_embeddings.extent(0));

    // The text tower is the alignment target and must not move.
    for (const auto& name : ps.names()) {
        ps.set_trainable(name, !has_prefix(name, kTextEnc));
    }
    auto frozen = snapshot_frozen(ps);

    // Evenly spaced frame subset, endpoints included.
    std::vector<int> picks;
    int f = mc.frames;
    int n = std::min(ac.frames_per_clip, f);
    for (int i = 0; i < n; ++i) {
        picks.push_back(n == 1 ? f / 2 : static_cast<int>(std::lround(i * double(f - 1) / (n - 1))));
    }

    auto batch_loss = [&](Graph& g, int idx) {
        std::vector<Var> rows;
        for (int k : picks) {
            Var cls = vit_encode_graph(g, ps, kVideoEnc, mc.vit, views[idx].video_chw[k]);
            rows.push_back(g.reshape(cls, {1, mc.vit.d}));
        }
        Var pooled = g.mean_rows(rows.size() == 1 ? rows[0] : g.vstack(rows));
        return g.cross_entropy_temp(g.cosine_logits(pooled, class_embeddings), labels[idx],
                                    ac.tau);
    };
    TrainResult result = run_sgd(ps, static_cast<int>(views.size()), ac.batch_size, ac.epochs,
                                 ac.base_lr, ac.weight_decay, ac.seed, batch_loss);
    check_frozen(ps, frozen);
    return result;
}

namespace {

json vit_json(const VitConfig& c) {
    return {{"image_h", c.image_h}, {"image_w", c.image_w}, {"channels", c.channels},
            {"patch_size", c.patch_size}, {"d", c.d}, {"layers", c.layers}, {"heads", c.heads}};
}

json text_json(const TextConfig& c) {
    return {{"vocab", c.vocab}, {"d", c.d}, {"layers", c.layers}, {"heads", c.heads},
            {"max_len", c.max_len}};
}

json model_json(const ModelConfig& mc) {
    json j;
    j["vit"] = vit_json(mc.vit);
    j["text"] = text_json(mc.text);
    j["thead"] = {{"d", mc.thead.d}, {"layers", mc.thead.layers}, {"heads", mc.thead.heads}};
    j["xhead"] = {{"d", mc.xhead.d}, {"heads", mc.xhead.heads}};
    j["aux"] = mc.aux;
    j["frames"] = mc.frames;
    j["stride"] = mc.stride;
    j["mel_bins"] = mc.mel_bins;
    j["crop_frames"] = mc.crop_frames;
    j["time_mask_max"] = mc.time_mask_max;
    j["freq_mask_max"] = mc.freq_mask_max;
    return j;
}

json train_json(const TrainConfig& tc) {
    json j;
    j["alpha"] = tc.alpha;
    j["tau"] = tc.tau;
    j["batch_size"] = tc.batch_size;
    j["epochs"] = tc.epochs;
    j["base_lr"] = tc.base_lr;
    j["weight_decay"] = tc.weight_decay;
    j["trainable_layers"] = tc.trainable_layers;
    j["seed"] = tc.seed;
    return j;
}

ModelConfig model_from_json(const json& j) {
    ModelConfig mc;
    const json& v = j.at("vit");
    mc.vit.image_h = v.at("image_h");
    mc.vit.image_w = v.at("image_w");
    mc.vit.channels = v.at("channels");
    mc.vit.patch_size = v.at("patch_size");
    mc.vit.d = v.at("d");
    mc.vit.layers = v.at("layers");
    mc.vit.heads = v.at("heads");
    const json& t = j.at("text");
    mc.text.vocab = t.at("vocab");
    mc.text.d = t.at("d");
    mc.text.layers = t.at("layers");
    mc.text.heads = t.at("heads");
    mc.text.max_len = t.at("max_len");
    mc.thead.d = j.at("thead").at("d");
    mc.thead.layers = j.at("thead").at("layers");
    mc.thead.heads = j.at("thead").at("heads");
    mc.xhead.d = j.at("xhead").at("d");
    mc.xhead.heads = j.at("xhead").at("heads");
    mc.aux = j.at("aux");
    mc.frames = j.at("frames");
    mc.stride = j.at("stride");
    mc.mel_bins = j.at("mel_bins");
    mc.crop_frames = j.at("crop_frames");
    mc.time_mask_max = j.at("time_mask_max");
    mc.freq_mask_max = j.at("freq_mask_max");
    return mc;
}

TrainConfig train_from_json(const json& j) {
    TrainConfig tc;
    tc.alpha = j.at("alpha");
    tc.tau = j.at("tau");
    tc.batch_size = j.at("batch_size");
    tc.epochs = j.at("epochs");
    tc.base_lr = j.at("base_lr");
    tc.weight_decay = j.at("weight_decay");
    tc.trainable_layers = j.at("trainable_layers");
    tc.seed = j.at("seed");
    return tc;
}

}  // namespace

void save_checkpoint(const std::string& dir, const ParamSet& ps, const ModelConfig& mc,
                     const TrainConfig& tc, const std::vector<StepRecord>& curve) {
    fs::create_directories(dir);
    ps.save((fs::path(dir) / "params.movp").string());
    json man;
    man["schema"] = 1;
    man["params_file"] = "params.movp";
    man["tensors"] = ps.count();
    man["scalars"] = ps.scalar_count();
    std::ofstream mout(fs::path(dir) / "manifest.json");
    mout << man.dump(2) << "\n";
    if (!mout) throw std::runtime_error("failed to write the checkpoint manifest");
    json cfg;
    cfg["schema"] = 1;
    cfg["model"] = model_json(mc);
    cfg["train"] = train_json(tc);
    std::ofstream out(fs::path(dir) / "config.json");
    out << cfg.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed to write the checkpoint config");
    std::ofstream csv(fs::path(dir) / "loss_curve.csv");
    csv << "step,lr,loss\n";
    char line[96];
    for (const auto& r : curve) {
        std::snprintf(line, sizeof(line), "%ld,%.17g,%.17g\n", r.step, r.lr, r.loss);
        csv << line;
    }
    if (!csv) throw std::runtime_error("failed to write the loss curve");
}

Checkpoint load_checkpoint(const std::string& dir) {
    Checkpoint ck;
    ck.params = ParamSet::load((fs::path(dir) / "params.movp").string());
    std::ifstream in(fs::path(dir) / "config.json");
    if (!in) throw std::invalid_argument("checkpoint config not found in " + dir);
    json cfg = json::parse(in);
    if (cfg.at("schema") != 1) throw std::invalid_argument("unknown checkpoint schema");
    ck.model = model_from_json(cfg.at("model"));
    ck.train = train_from_json(cfg.at("train"));
    std::ifstream csv(fs::path(dir) / "loss_curve.csv");
    if (!csv) throw std::invalid_argument("loss curve not found in " + dir);
    std::string line;
    if (!std::getline(csv, line) || line != "step,lr,loss") {
        throw std::invalid_argument("malformed loss curve header");
    }
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        StepRecord r;
        std::istringstream ss(line);
        char c1 = 0, c2 = 0;
        if (!(ss >> r.step >> c1 >> r.lr >> c2 >> r.loss) || c1 != ',' || c2 != ',') {
            throw std::invalid_argument("malformed loss curve line: " + line);
        }
        ck.curve.push_back(r);
    }
    return ck;
}

}  // namespace mov
