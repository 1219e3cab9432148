#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "mov/flow.hpp"
#include "mov/signalprep.hpp"
#include "mov/synthdata.hpp"
#include "mov/wav.hpp"

using namespace mov;
namespace fs = std::filesystem;

namespace {

double median_plane(const Tensor& flow, int plane) {
    std::vector<double> vals;
    for (int y = 0; y < flow.extent(0); ++y)
        for (int x = 0; x < flow.extent(1); ++x) vals.push_back(flow.at(y, x, plane));
    std::sort(vals.begin(), vals.end());
    return vals[vals.size() / 2];
}

GenerateConfig tiny_config(std::uint64_t seed) {
    GenerateConfig cfg;
    cfg.n_classes = 4;
    cfg.n_base = 2;
    cfg.train_per_class = 2;
    cfg.test_per_class = 1;
    cfg.frames = 4;
    cfg.audio_seconds = 0.25;
    cfg.seed = seed;
    return cfg;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("class specs: unique names, confusable pairs, in-range physics") {
    auto specs = make_class_specs(16);
    REQUIRE(specs.size() == 16);
    std::set<std::string> names;
    std::set<std::pair<double, double>> motions_seen;
    std::map<int, std::vector<int>> appearance_groups;
    for (int c = 0; c < 16; ++c) {
        const auto& s = specs[(std::size_t)c];
        names.insert(s.name);
        motions_seen.insert({s.dx, s.dy});
        appearance_groups[s.appearance].push_back(c);
        CHECK(std::abs(s.dx) <= 20.0);
        CHECK(std::abs(s.dy) <= 20.0);
        REQUIRE(!s.harmonics.empty());
        for (std::size_t k = 0; k < s.harmonics.size(); ++k) {
            CHECK((double)(k + 1) * s.f0 < 8000.0);
        }
    }
    CHECK(names.size() == 16);
    CHECK(motions_seen.size() == 4);

    // Half the classes are still-confusable: four appearance values are each
    // shared by a pair, and each pair differs in both motion and tone so the
    // auxiliary channels can resolve it. The rest are visually unique.
    REQUIRE(appearance_groups.size() == 12);
    int pairs = 0, singletons = 0;
    for (const auto& [app, members] : appearance_groups) {
        REQUIRE(members.size() <= 2);
        if (members.size() == 2) {
            ++pairs;
            const auto& a = specs[(std::size_t)members[0]];
            const auto& b = specs[(std::size_t)members[1]];
            CHECK(std::make_pair(a.dx, a.dy) != std::make_pair(b.dx, b.dy));
            CHECK(a.f0 != b.f0);
        } else {
            ++singletons;
        }
    }
    CHECK(pairs == 4);
    CHECK(singletons == 8);

    // the (motion word, tone word) combination is the class identity
    std::set<std::pair<double, std::pair<double, double>>> combos;
    for (const auto& s : specs) combos.insert({s.f0, {s.dx, s.dy}});
    CHECK(combos.size() == 16);

    CHECK_THROWS_AS(make_class_specs(3), std::invalid_argument);
    CHECK_THROWS_AS(make_class_specs(17), std::invalid_argument);
}

TEST_CASE("split_classes: partitions are sized, disjoint and exhaustive") {
    auto make_names = [](int n) {
        std::vector<std::string> v;
        for (int i = 0; i < n; ++i) v.push_back("class_" + std::to_string(i));
        return v;
    };

    auto [b1, n1] = split_classes(make_names(700), {400, 300, 5});
    CHECK(b1.size() == 400);
    CHECK(n1.size() == 300);

    auto [b2, n2] = split_classes(make_names(309), {154, 155, 5});
    CHECK(b2.size() == 154);
    CHECK(n2.size() == 155);

    std::vector<std::string> all = b2;
    all.insert(all.end(), n2.begin(), n2.end());
    std::sort(all.begin(), all.end());
    auto expect = make_names(309);
    std::sort(expect.begin(), expect.end());
    CHECK(all == expect);
    std::set<std::string> base_set(b2.begin(), b2.end());
    for (const auto& name : n2) CHECK(base_set.count(name) == 0);

    auto [b3, n3] = split_classes(make_names(309), {154, 155, 5});
    CHECK(b3 == b2);
    CHECK(n3 == n2);

    CHECK_THROWS_AS(split_classes(make_names(10), {4, 5, 1}), std::invalid_argument);
}

TEST_CASE("rendered motion is recovered by the flow estimator") {
    auto specs = make_class_specs(16);
    // horizontal mover: dx = +3
    const auto& drift = specs[0];
    REQUIRE(drift.dx == 3.0);
    auto frames = render_video(drift, 3, 32, 32, 4242);
    Tensor flow = estimate_flow(frames[1], frames[2]);
    CHECK(std::abs(median_plane(flow, 0) - 3.0) <= 0.5);
    CHECK(std::abs(median_plane(flow, 1)) <= 0.5);

    // vertical mover: dy = -3
    const auto& rise = specs[2];
    REQUIRE(rise.dy == -3.0);
    auto rframes = render_video(rise, 3, 32, 32, 4243);
    Tensor rflow = estimate_flow(rframes[0], rframes[1]);
    CHECK(std::abs(median_plane(rflow, 0)) <= 0.5);
    CHECK(std::abs(median_plane(rflow, 1) + 3.0) <= 0.5);
}

TEST_CASE("rendered audio peaks at the mel bin nearest the fundamental") {
    auto specs = make_class_specs(16);
    auto centers = mel_center_frequencies(128, 0.0, 8000.0);
    for (int c : {0, 8}) {
        const auto& spec = specs[(std::size_t)c];
        Waveform w = render_audio(spec, 2.0, 32000, 0.02, 777 + c);
        Tensor mel = log_mel_spectrogram(resample_to_16k_mono(w));
        REQUIRE(mel.extent(0) == 128);

        std::vector<double> energy(128, 0.0);
        for (int m = 0; m < 128; ++m)
            for (int t = 0; t < mel.extent(1); ++t) energy[(std::size_t)m] += mel.at(m, t);
        int argmax = (int)(std::max_element(energy.begin(), energy.end()) - energy.begin());

        int nearest = 0;
        for (int m = 1; m < 128; ++m) {
            if (std::abs(centers[(std::size_t)m] - spec.f0) <
                std::abs(centers[(std::size_t)nearest] - spec.f0)) {
                nearest = m;
            }
        }
        CHECK(argmax == nearest);
    }
}

TEST_CASE("generation is a pure function of the seed") {
    fs::path a = fresh_dir("mov_synth_a");
    fs::path b = fresh_dir("mov_synth_b");
    generate_dataset(tiny_config(99), a.string());
    generate_dataset(tiny_config(99), b.string());

    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
    }
    REQUIRE(rel.size() > 10);
    std::sort(rel.begin(), rel.end());
    for (const auto& r : rel) {
        REQUIRE(fs::exists(b / r));
        CHECK(slurp(a / r) == slurp(b / r));
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("generated manifest structure matches the configuration") {
    fs::path dir = fresh_dir("mov_synth_m");
    GenerateConfig cfg = tiny_config(7);
    DatasetManifest m = generate_dataset(cfg, dir.string());

    CHECK(m.base_classes().size() == 2);
    CHECK(m.novel_classes().size() == 2);
    CHECK(m.split_records("base-train").size() == 4);
    CHECK(m.split_records("base-test").size() == 2);
    CHECK(m.split_records("novel-test").size() == 2);

    // the loader revalidates structure and file presence
    DatasetManifest loaded = load_manifest((dir / "manifest.jsonl").string());
    CHECK(loaded.records == m.records);

    auto novel_list = m.novel_classes();
    std::set<std::string> novel(novel_list.begin(), novel_list.end());
    for (const auto& r : m.records) {
        if (novel.count(r.class_name)) CHECK(r.split == "novel-test");
    }
    fs::remove_all(dir);
}

TEST_CASE("manifest validation rejects leaks, duplicates and unknown fields") {
    fs::path dir = fresh_dir("mov_synth_v");
    DatasetManifest m = generate_dataset(tiny_config(13), dir.string());

    DatasetManifest leak = m;
    for (const auto& r : leak.records) {
        if (r.split == "novel-test") {
            ManifestRecord smuggled = r;
            smuggled.split = "base-train";
            smuggled.id += "-x";  // unique id so only the leak can fire
            leak.records.push_back(smuggled);
            break;
        }
    }
    REQUIRE(leak.records.size() == m.records.size() + 1);
    CHECK_THROWS_AS(validate_manifest(leak), std::invalid_argument);

    DatasetManifest dup = m;
    dup.records.push_back(dup.records.front());
    CHECK_THROWS_AS(validate_manifest(dup), std::invalid_argument);

    CHECK_THROWS_AS(validate_manifest(DatasetManifest{}), std::invalid_argument);

    fs::path bad = dir / "bad.jsonl";
    {
        std::ofstream out(bad);
        out << R"({"schema":1,"id":"a","class_name":"c","split":"base-train",)"
            << R"("video_dir":"v","audio_path":"a.wav","frames":1,"seed":1,"color":"red"})"
            << "\n";
    }
    CHECK_THROWS_AS(load_manifest(bad.string(), false), std::invalid_argument);

    fs::path vers = dir / "vers.jsonl";
    {
        std::ofstream out(vers);
        out << R"({"schema":2,"id":"a","class_name":"c","split":"base-train",)"
            << R"("video_dir":"v","audio_path":"a.wav","frames":1,"seed":1})"
            << "\n";
    }
    CHECK_THROWS_AS(load_manifest(vers.string(), false), std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("manifest loading checks that media files exist") {
    fs::path dir = fresh_dir("mov_synth_f");
    DatasetManifest m = generate_dataset(tiny_config(21), dir.string());
    fs::path victim = dir / m.records.front().video_dir / "frame_001.ppm";
    REQUIRE(fs::exists(victim));
    fs::remove(victim);
    CHECK_THROWS_AS(load_manifest((dir / "manifest.jsonl").string()), std::invalid_argument);
    CHECK_NOTHROW(load_manifest((dir / "manifest.jsonl").string(), false));
    fs::remove_all(dir);
}

TEST_CASE("manifest writing round-trips exactly") {
    fs::path dir = fresh_dir("mov_synth_r");
    fs::create_directories(dir);
    DatasetManifest m;
    ManifestRecord r;
    r.id = "cls-tr000";
    r.class_name = "drifting humming boxy";
    r.split = "base-train";
    r.video_dir = "media/cls/cls-tr000";
    r.audio_path = "media/cls/cls-tr000/audio.wav";
    r.frames = 16;
    r.seed = 0xFEEDFACECAFEBEEFull;
    m.records.push_back(r);
    r.id = "cls2-te000";
    r.class_name = "sliding droning round";
    r.split = "novel-test";
    m.records.push_back(r);

    fs::path path = dir / "manifest.jsonl";
    write_manifest(m, path.string());
    DatasetManifest back = load_manifest(path.string(), false);
    CHECK(back.records == m.records);
    fs::remove_all(dir);
}

TEST_CASE("generate_dataset rejects invalid counts") {
    CHECK_THROWS_AS(generate_dataset([] {
        GenerateConfig c = tiny_config(1);
        c.n_classes = 3;
        return c;
    }(), (fs::temp_directory_path() / "mov_synth_bad").string()),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_dataset([] {
        GenerateConfig c = tiny_config(1);
        c.train_per_class = 0;
        return c;
    }(), (fs::temp_directory_path() / "mov_synth_bad").string()),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_dataset([] {
        GenerateConfig c = tiny_config(1);
        c.n_base = 4;
        return c;
    }(), (fs::temp_directory_path() / "mov_synth_bad").string()),
                    std::invalid_argument);
}
