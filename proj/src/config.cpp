#include "mov/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mov {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int to_int(const std::string& v) {
    std::size_t used = 0;
    int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("not an integer: " + v);
    return out;
}

double to_double(const std::string& v) {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("not a number: " + v);
    return out;
}

std::uint64_t to_u64(const std::string& v) {
    std::size_t used = 0;
    unsigned long long out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("not a seed: " + v);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"run.seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
        {"run.out", [](RunConfig& c, const std::string& v) { c.out = v; }},
        {"run.jobs", [](RunConfig& c, const std::string& v) { c.jobs = to_int(v); }},

        {"data.classes", [](RunConfig& c, const std::string& v) { c.data.n_classes = to_int(v); }},
        {"data.base_classes", [](RunConfig& c, const std::string& v) { c.data.n_base = to_int(v); }},
        {"data.train_per_class",
         [](RunConfig& c, const std::string& v) { c.data.train_per_class = to_int(v); }},
        {"data.test_per_class",
         [](RunConfig& c, const std::string& v) { c.data.test_per_class = to_int(v); }},
        {"data.frames", [](RunConfig& c, const std::string& v) { c.data.frames = to_int(v); }},
        {"data.height", [](RunConfig& c, const std::string& v) { c.data.height = to_int(v); }},
        {"data.width", [](RunConfig& c, const std::string& v) { c.data.width = to_int(v); }},
        {"data.audio_seconds",
         [](RunConfig& c, const std::string& v) { c.data.audio_seconds = to_double(v); }},
        {"data.audio_rate",
         [](RunConfig& c, const std::string& v) { c.data.audio_rate = to_int(v); }},
        {"data.audio_noise",
         [](RunConfig& c, const std::string& v) { c.data.audio_noise = to_double(v); }},
        {"data.seed", [](RunConfig& c, const std::string& v) { c.data.seed = to_u64(v); }},

        {"model.aux", [](RunConfig& c, const std::string& v) { c.model.aux = v; }},
        {"model.frames", [](RunConfig& c, const std::string& v) { c.model.frames = to_int(v); }},
        {"model.stride", [](RunConfig& c, const std::string& v) { c.model.stride = to_int(v); }},
        {"model.mel_bins",
         [](RunConfig& c, const std::string& v) { c.model.mel_bins = to_int(v); }},
        {"model.crop_frames",
         [](RunConfig& c, const std::string& v) { c.model.crop_frames = to_int(v); }},
        {"model.time_mask_max",
         [](RunConfig& c, const std::string& v) { c.model.time_mask_max = to_int(v); }},
        {"model.freq_mask_max",
         [](RunConfig& c, const std::string& v) { c.model.freq_mask_max = to_int(v); }},
        {"model.embed_dim",
         [](RunConfig& c, const std::string& v) {
             int d = to_int(v);
             c.model.vit.d = d;
             c.model.text.d = d;
             c.model.thead.d = d;
             c.model.xhead.d = d;
         }},
        {"model.image_size",
         [](RunConfig& c, const std::string& v) {
             c.model.vit.image_h = to_int(v);
             c.model.vit.image_w = to_int(v);
         }},
        {"model.patch_size",
         [](RunConfig& c, const std::string& v) { c.model.vit.patch_size = to_int(v); }},
        {"model.vit_layers",
         [](RunConfig& c, const std::string& v) { c.model.vit.layers = to_int(v); }},
        {"model.vit_heads",
         [](RunConfig& c, const std::string& v) { c.model.vit.heads = to_int(v); }},
        {"model.text_vocab",
         [](RunConfig& c, const std::string& v) { c.model.text.vocab = to_int(v); }},
        {"model.text_layers",
         [](RunConfig& c, const std::string& v) { c.model.text.layers = to_int(v); }},
        {"model.text_heads",
         [](RunConfig& c, const std::string& v) { c.model.text.heads = to_int(v); }},
        {"model.text_max_len",
         [](RunConfig& c, const std::string& v) { c.model.text.max_len = to_int(v); }},
        {"model.thead_layers",
         [](RunConfig& c, const std::string& v) { c.model.thead.layers = to_int(v); }},
        {"model.thead_heads",
         [](RunConfig& c, const std::string& v) { c.model.thead.heads = to_int(v); }},
        {"model.xhead_heads",
         [](RunConfig& c, const std::string& v) { c.model.xhead.heads = to_int(v); }},

        {"train.alpha", [](RunConfig& c, const std::string& v) { c.train.alpha = to_double(v); }},
        {"train.tau", [](RunConfig& c, const std::string& v) { c.train.tau = to_double(v); }},
        {"train.batch_size",
         [](RunConfig& c, const std::string& v) { c.train.batch_size = to_int(v); }},
        {"train.epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = to_int(v); }},
        {"train.base_lr",
         [](RunConfig& c, const std::string& v) { c.train.base_lr = to_double(v); }},
        {"train.weight_decay",
         [](RunConfig& c, const std::string& v) { c.train.weight_decay = to_double(v); }},
        {"train.trainable_layers",
         [](RunConfig& c, const std::string& v) { c.train.trainable_layers = v; }},
        {"train.seed", [](RunConfig& c, const std::string& v) { c.train.seed = to_u64(v); }},

        {"align.tau", [](RunConfig& c, const std::string& v) { c.align.tau = to_double(v); }},
        {"align.batch_size",
         [](RunConfig& c, const std::string& v) { c.align.batch_size = to_int(v); }},
        {"align.epochs", [](RunConfig& c, const std::string& v) { c.align.epochs = to_int(v); }},
        {"align.base_lr",
         [](RunConfig& c, const std::string& v) { c.align.base_lr = to_double(v); }},
        {"align.weight_decay",
         [](RunConfig& c, const std::string& v) { c.align.weight_decay = to_double(v); }},
        {"align.frames_per_clip",
         [](RunConfig& c, const std::string& v) { c.align.frames_per_clip = to_int(v); }},
        {"align.seed", [](RunConfig& c, const std::string& v) { c.align.seed = to_u64(v); }},

        {"infer.tau", [](RunConfig& c, const std::string& v) { c.infer.tau = to_double(v); }},
        {"infer.tau_v", [](RunConfig& c, const std::string& v) { c.infer.tau_v = to_double(v); }},
        {"infer.tau_x", [](RunConfig& c, const std::string& v) { c.infer.tau_x = to_double(v); }},
        {"infer.beta", [](RunConfig& c, const std::string& v) { c.infer.beta = to_double(v); }},
        {"infer.views_video",
         [](RunConfig& c, const std::string& v) { c.infer.views_video = to_int(v); }},
        {"infer.views_audio",
         [](RunConfig& c, const std::string& v) { c.infer.views_audio = to_int(v); }},
        {"infer.fusion_mode",
         [](RunConfig& c, const std::string& v) { c.infer.fusion_mode = v; }},
    };
    return table;
}

}  // namespace

void RunConfig::validate() const {
    if (jobs < 1) throw std::invalid_argument("jobs must be at least 1");
    if (out.empty()) throw std::invalid_argument("output directory must be set");
    model.validate();
    train.validate();
    align.validate();
    infer.validate();
    if (data.height != model.vit.image_h || data.width != model.vit.image_w) {
        throw std::invalid_argument("dataset frame size must match the model's image size");
    }
    int span = (model.frames - 1) * model.stride + 1;
    if (span > data.frames) {
        throw std::invalid_argument("model frame span exceeds the dataset clip length");
    }
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw std::invalid_argument("line " + std::to_string(lineno) +
                                            ": malformed section header");
            }
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) {
                throw std::invalid_argument("line " + std::to_string(lineno) + ": empty section");
            }
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (section.empty() || key.empty()) {
            throw std::invalid_argument("line " + std::to_string(lineno) +
                                        ": key outside a section");
        }
        auto it = setters().find(section + "." + key);
        if (it == setters().end()) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": unknown setting " +
                                        section + "." + key);
        }
        try {
            it->second(cfg, value);
        } catch (const std::exception& e) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config file not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& c) {
    std::ostringstream o;
    o << "[run]\n";
    o << "seed = " << c.seed << "\n";
    o << "out = " << c.out << "\n";
    o << "jobs = " << c.jobs << "\n";
    o << "\n[data]\n";
    o << "classes = " << c.data.n_classes << "\n";
    o << "base_classes = " << c.data.n_base << "\n";
    o << "train_per_class = " << c.data.train_per_class << "\n";
    o << "test_per_class = " << c.data.test_per_class << "\n";
    o << "frames = " << c.data.frames << "\n";
    o << "height = " << c.data.height << "\n";
    o << "width = " << c.data.width << "\n";
    o << "audio_seconds = " << fmt(c.data.audio_seconds) << "\n";
    o << "audio_rate = " << c.data.audio_rate << "\n";
    o << "audio_noise = " << fmt(c.data.audio_noise) << "\n";
    o << "seed = " << c.data.seed << "\n";
    o << "\n[model]\n";
    o << "aux = " << c.model.aux << "\n";
    o << "frames = " << c.model.frames << "\n";
    o << "stride = " << c.model.stride << "\n";
    o << "mel_bins = " << c.model.mel_bins << "\n";
    o << "crop_frames = " << c.model.crop_frames << "\n";
    o << "time_mask_max = " << c.model.time_mask_max << "\n";
    o << "freq_mask_max = " << c.model.freq_mask_max << "\n";
    o << "embed_dim = " << c.model.vit.d << "\n";
    o << "image_size = " << c.model.vit.image_h << "\n";
    o << "patch_size = " << c.model.vit.patch_size << "\n";
    o << "vit_layers = " << c.model.vit.layers << "\n";
    o << "vit_heads = " << c.model.vit.heads << "\n";
    o << "text_vocab = " << c.model.text.vocab << "\n";
    o << "text_layers = " << c.model.text.layers << "\n";
    o << "text_heads = " << c.model.text.heads << "\n";
    o << "text_max_len = " << c.model.text.max_len << "\n";
    o << "thead_layers = " << c.model.thead.layers << "\n";
    o << "thead_heads = " << c.model.thead.heads << "\n";
    o << "xhead_heads = " << c.model.xhead.heads << "\n";
    o << "\n[train]\n";
    o << "alpha = " << fmt(c.train.alpha) << "\n";
    o << "tau = " << fmt(c.train.tau) << "\n";
    o << "batch_size = " << c.train.batch_size << "\n";
    o << "epochs = " << c.train.epochs << "\n";
    o << "base_lr = " << fmt(c.train.base_lr) << "\n";
    o << "weight_decay = " << fmt(c.train.weight_decay) << "\n";
    o << "trainable_layers = " << c.train.trainable_layers << "\n";
    o << "seed = " << c.train.seed << "\n";
    o << "\n[align]\n";
    o << "tau = " << fmt(c.align.tau) << "\n";
    o << "batch_size = " << c.align.batch_size << "\n";
    o << "epochs = " << c.align.epochs << "\n";
    o << "base_lr = " << fmt(c.align.base_lr) << "\n";
    o << "weight_decay = " << fmt(c.align.weight_decay) << "\n";
    o << "frames_per_clip = " << c.align.frames_per_clip << "\n";
    o << "seed = " << c.align.seed << "\n";
    o << "\n[infer]\n";
    o << "tau = " << fmt(c.infer.tau) << "\n";
    o << "tau_v = " << fmt(c.infer.tau_v) << "\n";
    o << "tau_x = " << fmt(c.infer.tau_x) << "\n";
    o << "beta = " << fmt(c.infer.beta) << "\n";
    o << "views_video = " << c.infer.views_video << "\n";
    o << "views_audio = " << c.infer.views_audio << "\n";
    o << "fusion_mode = " << c.infer.fusion_mode << "\n";
    return o.str();
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path);
    out << serialize_run_config(cfg);
    if (!out) throw std::runtime_error("failed to write the config: " + path);
}

}  // namespace mov
