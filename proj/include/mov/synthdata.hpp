#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mov/tensor.hpp"
#include "mov/wav.hpp"

namespace mov {

// One procedural class: a tinted sprite over a noise background with the
// whole scene translating at a fixed velocity, plus a tone mixture on the
// audio track. The (motion, tone) pair is unique per class. By default the
// sprite shape tracks the motion word and the tint tracks the tone word, so a
// still frame identifies the class; designated pairs of classes share one
// appearance, and those are only separable through the motion or the audio
// channel.
struct SynthClassSpec {
    std::string name;      // e.g. "drifting humming"
    std::string dir_name;  // e.g. "drifting_humming"
    double dx = 0.0;       // scene translation, px/frame
    double dy = 0.0;
    double f0 = 0.0;                // fundamental, Hz
    std::vector<double> harmonics;  // partial amplitudes at 1·f0, 2·f0, ...
    int appearance = 0;             // shape * 4 + tint, 0..15
    double noise_sigma = 2.0;       // per-frame pixel noise, 0..255 units
};

// Enumerates up to 16 classes over a 4x4 motion-by-tone grid. On the full
// grid, four fixed class pairs adopt a shared appearance (half the classes
// are still-confusable); each pair differs in both motion and tone, so either
// auxiliary channel resolves it.
std::vector<SynthClassSpec> make_class_specs(int n_classes);

// Deterministic renderers; everything is a pure function of the seed. Frames
// are [H,W,3] in 0..255, audio is mono at the requested rate.
std::vector<Tensor> render_video(const SynthClassSpec& spec, int frames, int height, int width,
                                 std::uint64_t sample_seed);
Waveform render_audio(const SynthClassSpec& spec, double seconds, int rate, double noise_amp,
                      std::uint64_t sample_seed);

struct SplitSpec {
    int n_base = 0;
    int n_novel = 0;
    std::uint64_t seed = 0;
};

// Seeded shuffle, first n_base names become base classes, the rest novel.
std::pair<std::vector<std::string>, std::vector<std::string>> split_classes(
    const std::vector<std::string>& all_classes, const SplitSpec& spec);

struct ManifestRecord {
    std::string id;
    std::string class_name;
    std::string split;       // base-train | base-test | novel-test
    std::string video_dir;   // relative to the manifest file
    std::string audio_path;  // relative to the manifest file
    int frames = 0;
    std::uint64_t seed = 0;

    bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;

    std::vector<std::string> base_classes() const;
    std::vector<std::string> novel_classes() const;
    std::vector<const ManifestRecord*> split_records(const std::string& split) const;
};

// Structural checks: nonempty, known splits, unique ids, and no class mixing
// novel-test with base records.
void validate_manifest(const DatasetManifest& m);

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path, bool check_files = true);

struct GenerateConfig {
    int n_classes = 16;
    int n_base = 10;
    int train_per_class = 20;  // base-train samples per base class
    int test_per_class = 10;   // base-test and novel-test samples per class
    int frames = 16;
    int height = 32;
    int width = 32;
    double audio_seconds = 2.0;
    int audio_rate = 32000;
    double audio_noise = 0.02;  // additive noise amplitude against unit tone
    std::uint64_t seed = 0;     // 0 = derive from the run's master seed
};

// Renders media under <out_dir>/media/... and writes <out_dir>/manifest.jsonl.
DatasetManifest generate_dataset(const GenerateConfig& cfg, const std::string& out_dir);

}  // namespace mov
