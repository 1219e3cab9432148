#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "mov/encoders.hpp"
#include "mov/image.hpp"
#include "mov/pipeline.hpp"
#include "mov/signalprep.hpp"
#include "mov/synthdata.hpp"

using namespace mov;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

// One tiny dataset shared by every test in this binary.
struct Fixture {
    fs::path root;
    DatasetManifest manifest;

    Fixture() {
        root = fs::temp_directory_path() / "mov_pipeline_data";
        if (!fs::exists(root / "manifest.jsonl")) {
            fs::remove_all(root);
            GenerateConfig cfg;
            cfg.n_classes = 4;
            cfg.n_base = 2;
            cfg.train_per_class = 1;
            cfg.test_per_class = 1;
            cfg.frames = 8;
            cfg.audio_seconds = 1.0;
            cfg.seed = 99;
            generate_dataset(cfg, root.string());
        }
        manifest = load_manifest((root / "manifest.jsonl").string());
    }

    ManifestRecord train_record() const {
        for (const auto& r : manifest.records) {
            if (r.split == "base-train") return r;
        }
        throw std::logic_error("fixture has no training record");
    }
};

ModelConfig flow_config() {
    ModelConfig mc;
    mc.aux = "flow";
    mc.frames = 3;
    mc.stride = 2;
    return mc;
}

ModelConfig audio_config() {
    ModelConfig mc;
    mc.aux = "audio";
    mc.frames = 3;
    mc.stride = 1;
    return mc;
}

bool views_equal(const SampleView& a, const SampleView& b) {
    if (a.video_chw.size() != b.video_chw.size() || a.aux_chw.size() != b.aux_chw.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.video_chw.size(); ++i) {
        if (!bitwise_equal(a.video_chw[i], b.video_chw[i])) return false;
    }
    for (std::size_t i = 0; i < a.aux_chw.size(); ++i) {
        if (!bitwise_equal(a.aux_chw[i], b.aux_chw[i])) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("record media loads back from disk") {
    Fixture fx;
    const auto r = fx.train_record();
    auto frames = load_record_frames(fx.root.string(), r);
    REQUIRE(static_cast<int>(frames.size()) == r.frames);
    for (const auto& f : frames) {
        CHECK(f.shape() == std::vector<int>{32, 32, 3});
    }
    Waveform w = load_record_audio(fx.root.string(), r);
    CHECK(w.samples.size() == 32000);  // one second at the synthesis rate
}

TEST_CASE("training views are a pure function of the seed") {
    Fixture fx;
    ModelConfig mc = flow_config();
    const auto r = fx.train_record();
    SampleView a = build_train_view(fx.root.string(), r, mc, 1234);
    SampleView b = build_train_view(fx.root.string(), r, mc, 1234);
    CHECK(views_equal(a, b));
    REQUIRE(a.video_chw.size() == 3);
    REQUIRE(a.aux_chw.size() == 3);
    for (const auto& t : a.video_chw) CHECK(t.shape() == std::vector<int>{3, 32, 32});
    for (const auto& t : a.aux_chw) CHECK(t.shape() == std::vector<int>{3, 32, 32});

    // Some seed in a small pool must pick a different window or flip.
    bool any_differs = false;
    for (std::uint64_t s = 0; s < 6 && !any_differs; ++s) {
        any_differs = !views_equal(a, build_train_view(fx.root.string(), r, mc, s));
    }
    CHECK(any_differs);
}

TEST_CASE("flow channels look like quantized flow") {
    Fixture fx;
    ModelConfig mc = flow_config();
    SampleView v = build_train_view(fx.root.string(), fx.train_record(), mc, 7);
    // The padding channel of a flow image is byte zero everywhere, which the
    // [-1,1] normalization maps to exactly -1.
    for (const auto& t : v.aux_chw) {
        for (int y = 0; y < t.extent(1); ++y)
            for (int x = 0; x < t.extent(2); ++x) {
                CHECK(t.at(2, y, x) == -1.0);
            }
    }
    // The last two auxiliary entries are the same flow image by construction.
    CHECK(bitwise_equal(v.aux_chw[1], v.aux_chw[2]));
    CHECK(!bitwise_equal(v.aux_chw[0], v.video_chw[0]));
}

TEST_CASE("evaluation views are deterministic with spread starts") {
    Fixture fx;
    ModelConfig mc = flow_config();  // span 5 over 8 frames
    const auto r = fx.train_record();
    auto views = build_eval_views(fx.root.string(), r, mc, 2);
    REQUIRE(views.size() == 2);
    CHECK(!views_equal(views[0], views[1]));
    auto again = build_eval_views(fx.root.string(), r, mc, 2);
    CHECK(views_equal(views[0], again[0]));
    CHECK(views_equal(views[1], again[1]));

    // A single view is centered: with 8 frames and span 5 the start lands on
    // frame 1, so the first image equals frame 1 exactly.
    auto centered = build_eval_views(fx.root.string(), r, mc, 1);
    REQUIRE(centered.size() == 1);
    Tensor frame1 = image_to_chw(load_record_frames(fx.root.string(), r)[1]);
    CHECK(bitwise_equal(centered[0].video_chw[0], frame1));

    CHECK_THROWS_AS(build_eval_views(fx.root.string(), r, mc, 0), std::invalid_argument);
}

TEST_CASE("audio views crop the spectrogram deterministically") {
    Fixture fx;
    ModelConfig mc = audio_config();
    const auto r = fx.train_record();
    SampleView tr = build_train_view(fx.root.string(), r, mc, 5);
    REQUIRE(tr.aux_chw.size() == 1);
    CHECK(tr.aux_chw[0].shape() == std::vector<int>{3, mc.mel_bins, mc.crop_frames});

    auto views = build_eval_views(fx.root.string(), r, mc, 2);
    REQUIRE(views.size() == 2);
    CHECK(views[0].aux_chw[0].shape() == std::vector<int>{3, mc.mel_bins, mc.crop_frames});
    CHECK(!bitwise_equal(views[0].aux_chw[0], views[1].aux_chw[0]));
    auto again = build_eval_views(fx.root.string(), r, mc, 2);
    CHECK(bitwise_equal(views[0].aux_chw[0], again[0].aux_chw[0]));

    // The first crop starts at time zero of the full normalized spectrogram.
    Waveform w = load_record_audio(fx.root.string(), r);
    Tensor spec = normalize_spectrogram(log_mel_spectrogram(resample_to_16k_mono(w), mc.mel_bins));
    for (int m = 0; m < mc.mel_bins; ++m)
        for (int t = 0; t < mc.crop_frames; ++t) {
            REQUIRE(views[0].aux_chw[0].at(0, m, t) == spec.at(m, t));
        }
}

TEST_CASE("preprocess cache round trips and guards its settings") {
    Fixture fx;
    ModelConfig mc = flow_config();
    fs::path cache = fresh_dir("mov_pipeline_cache");
    const int eval_views = 2;
    const std::uint64_t seed = 404;
    preprocess_manifest(fx.manifest, fx.root.string(), mc, eval_views, seed, cache.string());

    CHECK_NOTHROW(verify_cache(cache.string(), mc, eval_views, seed));
    CHECK_THROWS_AS(verify_cache(cache.string(), mc, eval_views + 1, seed), std::invalid_argument);
    CHECK_THROWS_AS(verify_cache(cache.string(), mc, eval_views, seed + 1), std::invalid_argument);
    ModelConfig other = mc;
    other.frames = 4;
    CHECK_THROWS_AS(verify_cache(cache.string(), other, eval_views, seed), std::invalid_argument);
    CHECK_THROWS_AS(verify_cache((cache / "missing").string(), mc, eval_views, seed),
                    std::invalid_argument);

    for (const auto& r : fx.manifest.records) {
        if (r.split == "base-train") {
            SampleView direct =
                build_train_view(fx.root.string(), r, mc, derive_seed(seed, "view." + r.id));
            CHECK(views_equal(direct, load_train_view(cache.string(), mc, r.id)));
        } else {
            auto direct = build_eval_views(fx.root.string(), r, mc, eval_views);
            auto cached = load_eval_views(cache.string(), mc, r.id, eval_views);
            REQUIRE(cached.size() == direct.size());
            for (std::size_t v = 0; v < direct.size(); ++v) {
                CHECK(views_equal(direct[v], cached[v]));
            }
        }
    }
}
