#include "mov/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "mov/image.hpp"
#include "mov/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mov {

namespace {

struct MotionSpec {
    const char* word;
    double dx, dy;
};
struct ToneSpec {
    const char* word;
    double f0;
};

constexpr MotionSpec kMotions[4] = {
    {"drifting", 3.0, 0.0},
    {"sliding", -3.0, 0.0},
    {"rising", 0.0, -3.0},
    {"sinking", 0.0, 3.0},
};
// Fundamentals sit on 16 kHz DFT bin frequencies that also land on mel-bank
// bin centers, so the dominant spectrogram bin of a tone is unambiguous.
constexpr ToneSpec kTones[4] = {
    {"humming", 375.0},
    {"droning", 1156.25},
    {"chiming", 2156.25},
    {"whistling", 5187.5},
};
// Partials above this are dropped so every component stays comfortably under
// the 8 kHz edge of the mel bank.
constexpr double kMaxPartialHz = 7600.0;

constexpr double kTints[4][3] = {
    {210.0, 70.0, 70.0},
    {70.0, 200.0, 70.0},
    {80.0, 80.0, 215.0},
    {205.0, 205.0, 60.0},
};

int wrap(int v, int m) { return ((v % m) + m) % m; }

bool sprite_mask(int shape, int ox, int oy) {
    switch (shape) {
        case 0: return std::abs(ox) <= 5 && std::abs(oy) <= 5;
        case 1: return ox * ox + oy * oy <= 36;
        case 2: return std::abs(ox) + std::abs(oy) <= 6;
        default: {
            int r = std::max(std::abs(ox), std::abs(oy));
            return r >= 4 && r <= 6;
        }
    }
}

const std::set<std::string>& known_splits() {
    static const std::set<std::string> s{"base-train", "base-test", "novel-test"};
    return s;
}

std::string frame_name(int k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%03d.ppm", k);
    return buf;
}

ManifestRecord record_from_json(const json& j) {
    static const std::set<std::string> known{"schema",    "id",     "class_name", "split",
                                            "video_dir", "audio_path", "frames", "seed"};
    if (!j.is_object()) throw std::invalid_argument("manifest line is not an object");
    for (const auto& item : j.items()) {
        if (!known.count(item.key())) {
            throw std::invalid_argument("manifest record has unknown field: " + item.key());
        }
    }
    for (const auto& k : known) {
        if (!j.contains(k)) throw std::invalid_argument("manifest record missing field: " + k);
    }
    if (!j.at("schema").is_number_integer() || j.at("schema").get<int>() != 1) {
        throw std::invalid_argument("unsupported manifest schema version");
    }
    ManifestRecord r;
    r.id = j.at("id").get<std::string>();
    r.class_name = j.at("class_name").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.video_dir = j.at("video_dir").get<std::string>();
    r.audio_path = j.at("audio_path").get<std::string>();
    r.frames = j.at("frames").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
}

json record_to_json(const ManifestRecord& r) {
    json j;
    j["schema"] = 1;
    j["id"] = r.id;
    j["class_name"] = r.class_name;
    j["split"] = r.split;
    j["video_dir"] = r.video_dir;
    j["audio_path"] = r.audio_path;
    j["frames"] = r.frames;
    j["seed"] = r.seed;
    return j;
}

std::vector<std::string> unique_in_order(const std::vector<const ManifestRecord*>& recs) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto* r : recs) {
        if (seen.insert(r->class_name).second) out.push_back(r->class_name);
    }
    return out;
}

}  // namespace

std::vector<SynthClassSpec> make_class_specs(int n_classes) {
    if (n_classes < 4 || n_classes > 16) {
        throw std::invalid_argument("class count must be between 4 and 16");
    }
    // Still-confusable pairs: the second class adopts the appearance of the
    // first. Members differ in both motion and tone, so flow or audio can
    // always separate what the frames cannot.
    constexpr int kConfusablePairs[4][2] = {{0, 5}, {1, 6}, {2, 7}, {10, 15}};
    std::vector<SynthClassSpec> specs;
    for (int c = 0; c < n_classes; ++c) {
        int tone = c / 4, motion = c % 4;
        int shape = motion, tint = tone;
        for (const auto& pair : kConfusablePairs) {
            if (pair[1] == c && pair[0] < n_classes) {
                shape = pair[0] % 4;
                tint = pair[0] / 4;
            }
        }
        SynthClassSpec s;
        s.name = std::string(kMotions[motion].word) + " " + kTones[tone].word;
        s.dir_name = s.name;
        std::replace(s.dir_name.begin(), s.dir_name.end(), ' ', '_');
        s.dx = kMotions[motion].dx;
        s.dy = kMotions[motion].dy;
        s.f0 = kTones[tone].f0;
        const double amps[3] = {1.0, 0.35, 0.15};
        for (int k = 0; k < 3; ++k) {
            if ((k + 1) * s.f0 < kMaxPartialHz) s.harmonics.push_back(amps[k]);
        }
        s.appearance = shape * 4 + tint;
        s.noise_sigma = 2.0 + shape;
        specs.push_back(std::move(s));
    }
    return specs;
}

std::vector<Tensor> render_video(const SynthClassSpec& spec, int frames, int height, int width,
                                 std::uint64_t sample_seed) {
    if (frames < 1 || height < 16 || width < 16) {
        throw std::invalid_argument("bad video render request");
    }
    if (std::abs(spec.dx) > 20.0 || std::abs(spec.dy) > 20.0) {
        throw std::invalid_argument("class speed exceeds the flow range");
    }
    Rng rng(derive_seed(sample_seed, "video"));

    // Static scene: background noise washed with the class tint plus one
    // neutral bright sprite. Tint lives on the background (a global color
    // statistic) and shape on the sprite (a local pattern), so the two
    // appearance channels stay spatially disentangled. Every frame is this
    // scene shifted toroidally, so the ground-truth flow is exactly the
    // per-frame translation everywhere.
    int shape = spec.appearance / 4, tint_ix = spec.appearance % 4;
    double tint[3];
    for (int c = 0; c < 3; ++c) {
        tint[c] = std::clamp(kTints[tint_ix][c] + rng.uniform(-20.0, 20.0), 0.0, 255.0);
    }
    Tensor scene({height, width, 3});
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double lum = 0.35 + 0.55 * rng.uniform();
            for (int c = 0; c < 3; ++c) scene.at(y, x, c) = lum * tint[c];
        }
    }
    int cx = (int)rng.integer(width), cy = (int)rng.integer(height);
    for (int oy = -6; oy <= 6; ++oy) {
        for (int ox = -6; ox <= 6; ++ox) {
            if (!sprite_mask(shape, ox, oy)) continue;
            int y = wrap(cy + oy, height), x = wrap(cx + ox, width);
            double edge = rng.uniform(-15.0, 15.0);
            for (int c = 0; c < 3; ++c) scene.at(y, x, c) = 228.0 + edge;
        }
    }

    std::vector<Tensor> out;
    for (int k = 0; k < frames; ++k) {
        int sx = (int)std::lround(k * spec.dx);
        int sy = (int)std::lround(k * spec.dy);
        Tensor frame({height, width, 3});
        Rng noise(derive_seed(sample_seed, "frame_noise", k));
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                for (int c = 0; c < 3; ++c) {
                    double v = scene.at(wrap(y - sy, height), wrap(x - sx, width), c) +
                               spec.noise_sigma * noise.normal();
                    frame.at(y, x, c) = std::clamp(v, 0.0, 255.0);
                }
            }
        }
        out.push_back(std::move(frame));
    }
    return out;
}

Waveform render_audio(const SynthClassSpec& spec, double seconds, int rate, double noise_amp,
                      std::uint64_t sample_seed) {
    if (seconds <= 0.0 || rate <= 0) throw std::invalid_argument("bad audio render request");
    if (spec.f0 <= 0.0 || spec.f0 >= 8000.0) {
        throw std::invalid_argument("class fundamental must sit below 8 kHz");
    }
    Rng rng(derive_seed(sample_seed, "audio"));
    long n = std::lround(seconds * rate);
    std::vector<double> phase(spec.harmonics.size());
    for (double& p : phase) p = rng.uniform(0.0, 2.0 * M_PI);

    Waveform w;
    w.sample_rate = rate;
    w.channels = 1;
    w.samples.resize((std::size_t)n);
    double peak = 0.0;
    for (long i = 0; i < n; ++i) {
        double t = (double)i / rate;
        double v = 0.0;
        for (std::size_t k = 0; k < spec.harmonics.size(); ++k) {
            v += spec.harmonics[k] * std::sin(2.0 * M_PI * spec.f0 * (k + 1) * t + phase[k]);
        }
        v += noise_amp * rng.normal();
        w.samples[(std::size_t)i] = v;
        peak = std::max(peak, std::abs(v));
    }
    if (peak > 0.0) {
        for (double& v : w.samples) v *= 0.75 / peak;
    }
    return w;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_classes(
    const std::vector<std::string>& all_classes, const SplitSpec& spec) {
    if (spec.n_base < 1 || spec.n_novel < 1 ||
        (std::size_t)(spec.n_base + spec.n_novel) != all_classes.size()) {
        throw std::invalid_argument("split sizes must cover the class list");
    }
    std::set<std::string> uniq(all_classes.begin(), all_classes.end());
    if (uniq.size() != all_classes.size()) {
        throw std::invalid_argument("class names must be unique");
    }
    std::vector<std::string> shuffled = all_classes;
    Rng rng(derive_seed(spec.seed, "class_split"));
    rng.shuffle(shuffled);
    std::vector<std::string> base(shuffled.begin(), shuffled.begin() + spec.n_base);
    std::vector<std::string> novel(shuffled.begin() + spec.n_base, shuffled.end());
    return {base, novel};
}

std::vector<std::string> DatasetManifest::base_classes() const {
    std::vector<const ManifestRecord*> recs;
    for (const auto& r : records) {
        if (r.split == "base-train" || r.split == "base-test") recs.push_back(&r);
    }
    return unique_in_order(recs);
}

std::vector<std::string> DatasetManifest::novel_classes() const {
    std::vector<const ManifestRecord*> recs;
    for (const auto& r : records) {
        if (r.split == "novel-test") recs.push_back(&r);
    }
    return unique_in_order(recs);
}

std::vector<const ManifestRecord*> DatasetManifest::split_records(const std::string& split) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(&r);
    }
    return out;
}

void validate_manifest(const DatasetManifest& m) {
    if (m.records.empty()) throw std::invalid_argument("manifest has no records");
    std::set<std::string> ids;
    std::map<std::string, std::set<std::string>> class_splits;
    for (const auto& r : m.records) {
        if (r.id.empty() || r.class_name.empty() || r.video_dir.empty() || r.audio_path.empty()) {
            throw std::invalid_argument("manifest record has empty fields");
        }
        if (!known_splits().count(r.split)) {
            throw std::invalid_argument("unknown split: " + r.split);
        }
        if (r.frames < 1) throw std::invalid_argument("record frame count must be positive");
        if (!ids.insert(r.id).second) {
            throw std::invalid_argument("duplicate sample id: " + r.id);
        }
        class_splits[r.class_name].insert(r.split);
    }
    for (const auto& [name, splits] : class_splits) {
        if (splits.count("novel-test") && splits.size() > 1) {
            throw std::invalid_argument("novel class leaks into base splits: " + name);
        }
    }
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
    validate_manifest(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open manifest for writing: " + path);
    for (const auto& r : m.records) out << record_to_json(r).dump() << "\n";
    if (!out) throw std::runtime_error("manifest write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path, bool check_files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open manifest: " + path);
    DatasetManifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::invalid_argument(std::string("manifest parse error: ") + e.what());
        }
        m.records.push_back(record_from_json(j));
    }
    validate_manifest(m);
    if (check_files) {
        fs::path root = fs::path(path).parent_path();
        for (const auto& r : m.records) {
            for (int k = 0; k < r.frames; ++k) {
                fs::path f = root / r.video_dir / frame_name(k);
                if (!fs::exists(f)) {
                    throw std::invalid_argument("missing frame file: " + f.string());
                }
            }
            if (!fs::exists(root / r.audio_path)) {
                throw std::invalid_argument("missing audio file: " + r.audio_path);
            }
        }
    }
    return m;
}

DatasetManifest generate_dataset(const GenerateConfig& cfg, const std::string& out_dir) {
    if (cfg.n_classes < 4 || cfg.n_classes > 16) {
        throw std::invalid_argument("class count must be between 4 and 16");
    }
    if (cfg.n_base < 1 || cfg.n_base >= cfg.n_classes) {
        throw std::invalid_argument("base class count must leave at least one novel class");
    }
    if (cfg.train_per_class < 1 || cfg.test_per_class < 1 || cfg.frames < 2) {
        throw std::invalid_argument("sample and frame counts must be positive");
    }
    if (cfg.audio_seconds <= 0.0 || cfg.audio_rate <= 0 || cfg.audio_noise < 0.0) {
        throw std::invalid_argument("bad audio settings");
    }

    auto specs = make_class_specs(cfg.n_classes);
    std::vector<std::string> names;
    for (const auto& s : specs) names.push_back(s.name);
    auto [base, novel] =
        split_classes(names, {cfg.n_base, cfg.n_classes - cfg.n_base, cfg.seed});
    std::set<std::string> base_set(base.begin(), base.end());

    fs::create_directories(out_dir);
    DatasetManifest m;
    for (const auto& spec : specs) {
        bool is_base = base_set.count(spec.name) > 0;
        struct Group {
            const char* tag;
            const char* split;
            int count;
        };
        std::vector<Group> groups;
        if (is_base) {
            groups.push_back({"tr", "base-train", cfg.train_per_class});
            groups.push_back({"te", "base-test", cfg.test_per_class});
        } else {
            groups.push_back({"te", "novel-test", cfg.test_per_class});
        }
        for (const auto& grp : groups) {
            for (int i = 0; i < grp.count; ++i) {
                char idx[16];
                std::snprintf(idx, sizeof(idx), "%s%03d", grp.tag, i);
                ManifestRecord r;
                r.id = spec.dir_name + "-" + idx;
                r.class_name = spec.name;
                r.split = grp.split;
                r.video_dir = "media/" + spec.dir_name + "/" + r.id;
                r.audio_path = r.video_dir + "/audio.wav";
                r.frames = cfg.frames;
                r.seed = derive_seed(cfg.seed, "sample." + r.id);

                fs::path dir = fs::path(out_dir) / r.video_dir;
                fs::create_directories(dir);
                auto frames = render_video(spec, cfg.frames, cfg.height, cfg.width, r.seed);
                for (int k = 0; k < cfg.frames; ++k) {
                    save_ppm((dir / frame_name(k)).string(), frames[(std::size_t)k]);
                }
                Waveform w = render_audio(spec, cfg.audio_seconds, cfg.audio_rate,
                                          cfg.audio_noise, r.seed);
                save_wav((fs::path(out_dir) / r.audio_path).string(), w);
                m.records.push_back(std::move(r));
            }
        }
    }
    write_manifest(m, (fs::path(out_dir) / "manifest.jsonl").string());
    return m;
}

}  // namespace mov
