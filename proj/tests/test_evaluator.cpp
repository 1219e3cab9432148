#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "mov/evaluator.hpp"
#include "mov/rng.hpp"
#include "mov/trainer.hpp"

using namespace mov;
namespace fs = std::filesystem;

namespace {

EmbeddingTable orthogonal_table(const std::vector<std::string>& names, int d) {
    EmbeddingTable t;
    t.names = names;
    t.embeddings = Tensor({static_cast<int>(names.size()), d});
    for (int c = 0; c < t.size(); ++c) t.embeddings.at(c, c) = 1.0;
    return t;
}

Tensor basis(int d, int axis, double scale = 1.0) {
    Tensor v({d});
    v.at(axis) = scale;
    return v;
}

Tensor random_unit(int d, Rng& rng) {
    Tensor v({d});
    double n = 0.0;
    for (int j = 0; j < d; ++j) {
        v.at(j) = rng.normal(0.0, 1.0);
        n += v.at(j) * v.at(j);
    }
    n = std::sqrt(n);
    for (int j = 0; j < d; ++j) v.at(j) /= n;
    return v;
}

ProbabilityVector one_hot(int n, int idx) {
    Tensor t({n});
    t.at(idx) = 1.0;
    return ProbabilityVector(t);
}

ModelConfig micro_config() {
    ModelConfig mc;
    mc.vit = VitConfig{16, 16, 3, 8, 32, 2, 4};
    mc.text = TextConfig{256, 32, 1, 4, 16};
    mc.thead = TemporalHeadConfig{32, 1, 4};
    mc.xhead = CrossHeadConfig{32, 4};
    mc.aux = "flow";
    mc.frames = 2;
    return mc;
}

SampleView random_view(const ModelConfig& mc, std::uint64_t seed) {
    Rng rng(seed);
    SampleView v;
    auto image = [&]() {
        Tensor t({3, mc.vit.image_h, mc.vit.image_w});
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, 0.5);
        return t;
    };
    for (int k = 0; k < mc.frames; ++k) v.video_chw.push_back(image());
    for (int k = 0; k < mc.frames; ++k) v.aux_chw.push_back(image());
    return v;
}

}  // namespace

TEST_CASE("harmonic mean reference values") {
    CHECK(std::fabs(harmonic_mean(51.2, 56.7) - 53.8) < 0.05);
    CHECK(std::fabs(harmonic_mean(68.4, 51.5) - 58.8) < 0.05);
    CHECK(harmonic_mean(42.0, 42.0) == doctest::Approx(42.0).epsilon(1e-12));
    CHECK(harmonic_mean(0.0, 0.0) == 0.0);
    CHECK(harmonic_mean(0.0, 80.0) == 0.0);
    CHECK_THROWS_AS(harmonic_mean(-1.0, 5.0), std::invalid_argument);
}

TEST_CASE("base prediction closed forms") {
    int d = 16;
    auto table = orthogonal_table({"a", "b", "c", "d"}, d);

    ProbabilityVector hit = predict_base(basis(d, 1, 3.0), table, 0.01);
    CHECK(hit[1] >= 0.999);
    CHECK(hit.argmax() == 1);

    ProbabilityVector flat = predict_base(basis(d, 9), table, 0.01);
    for (int c = 0; c < 4; ++c) CHECK(flat[c] == doctest::Approx(0.25).epsilon(1e-9));

    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        ProbabilityVector p = predict_base(random_unit(d, rng), table, 0.01);
        double sum = 0.0;
        for (int c = 0; c < p.size(); ++c) sum += p[c];
        CHECK(std::fabs(sum - 1.0) < 1e-6);
    }

    EmbeddingTable empty;
    CHECK_THROWS_AS(predict_base(basis(d, 0), empty, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(predict_base(basis(d, 0), table, 0.0), std::invalid_argument);
}

TEST_CASE("novel prediction is a calibrated convex mix") {
    int d = 16;
    auto table = orthogonal_table({"x", "y"}, d);
    InferenceConfig cfg;

    // Saturated opposite paths: auxiliary votes class 0, video votes class 1.
    ProbabilityVector p = predict_novel(basis(d, 0, 2.0), basis(d, 1, 0.5), table, cfg);
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-6));

    // beta = 0 collapses onto the video path.
    InferenceConfig beta0 = cfg;
    beta0.beta = 0.0;
    Rng rng(7);
    Tensor xf = random_unit(d, rng), vf = random_unit(d, rng);
    ProbabilityVector mixed = predict_novel(xf, vf, table, beta0);
    ProbabilityVector video = softmax(
        Tensor::from({2}, {cosine_similarity(vf, basis(d, 0)), cosine_similarity(vf, basis(d, 1))}),
        cfg.tau_v);
    for (int c = 0; c < 2; ++c) CHECK(mixed[c] == doctest::Approx(video[c]).epsilon(1e-12));

    // Any beta yields a valid distribution.
    for (double beta : {0.0, 0.3, 1.0}) {
        InferenceConfig c2 = cfg;
        c2.beta = beta;
        ProbabilityVector q = predict_novel(random_unit(d, rng), random_unit(d, rng), table, c2);
        double sum = 0.0;
        for (int c = 0; c < q.size(); ++c) {
            CHECK(q[c] >= 0.0);
            sum += q[c];
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }

    InferenceConfig bad = cfg;
    bad.tau_v = 0.0;
    CHECK_THROWS_AS(predict_novel(xf, vf, table, bad), std::invalid_argument);
    bad = cfg;
    bad.beta = 1.5;
    CHECK_THROWS_AS(predict_novel(xf, vf, table, bad), std::invalid_argument);
    bad = cfg;
    bad.fusion_mode = "late";
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("view aggregation is the arithmetic mean") {
    ProbabilityVector a = one_hot(3, 0), b = one_hot(3, 2);
    ProbabilityVector m = aggregate_views({a, b});
    CHECK(m[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m[2] == doctest::Approx(0.5).epsilon(1e-12));

    ProbabilityVector single = aggregate_views({a});
    for (int i = 0; i < 3; ++i) CHECK(single[i] == a[i]);

    // Permutation invariance and convexity.
    Rng rng(3);
    std::vector<ProbabilityVector> views;
    for (int v = 0; v < 4; ++v) {
        Tensor raw({5});
        for (int i = 0; i < 5; ++i) raw.at(i) = rng.normal(0.0, 1.0);
        views.push_back(softmax(raw, 1.0));
    }
    ProbabilityVector fwd = aggregate_views(views);
    std::vector<ProbabilityVector> rev(views.rbegin(), views.rend());
    ProbabilityVector bwd = aggregate_views(rev);
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        CHECK(fwd[i] == doctest::Approx(bwd[i]).epsilon(1e-15));
        sum += fwd[i];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);

    CHECK_THROWS_AS(aggregate_views({}), std::invalid_argument);
    CHECK_THROWS_AS(aggregate_views({one_hot(3, 0), one_hot(4, 0)}), std::invalid_argument);
}

TEST_CASE("entropy grows with temperature") {
    Rng rng(11);
    std::vector<double> taus = {0.0001, 0.0003, 0.001, 0.003, 0.01, 0.03, 1.0, 10.0};
    for (int draw = 0; draw < 100; ++draw) {
        Tensor logits({6});
        for (int i = 0; i < 6; ++i) logits.at(i) = rng.normal(0.0, 1.0);
        double prev = -1.0;
        for (double tau : taus) {
            double h = entropy(softmax(logits, tau));
            CHECK(h >= prev - 1e-12);
            prev = h;
        }
    }
}

TEST_CASE("per-class deltas sort and check their inputs") {
    std::map<std::string, double> a = {{"p", 50.0}, {"q", 80.0}, {"r", 10.0}};
    std::map<std::string, double> self_delta_src = a;
    for (const auto& [name, delta] : per_class_delta(a, self_delta_src)) {
        CHECK(delta == 0.0);
        (void)name;
    }

    std::map<std::string, double> b = {{"p", 50.0}, {"q", 70.0}, {"r", 10.0}};
    auto deltas = per_class_delta(a, b);
    CHECK(deltas.front().first == "q");
    CHECK(deltas.front().second == doctest::Approx(10.0));

    // Equal per-class counts: deltas sum to the mean-accuracy gap times the
    // class count.
    double sum = 0.0, mean_a = 0.0, mean_b = 0.0;
    for (const auto& [name, delta] : deltas) {
        sum += delta;
        mean_a += a[name];
        mean_b += b[name];
    }
    mean_a /= 3.0;
    mean_b /= 3.0;
    CHECK(sum == doctest::Approx((mean_a - mean_b) * 3.0).epsilon(1e-12));

    std::map<std::string, double> wrong = {{"p", 1.0}, {"z", 2.0}, {"q", 3.0}};
    CHECK_THROWS_AS(per_class_delta(a, wrong), std::invalid_argument);
    std::map<std::string, double> fewer = {{"p", 1.0}};
    CHECK_THROWS_AS(per_class_delta(a, fewer), std::invalid_argument);
}

TEST_CASE("evaluation at chance level under random labels") {
    ModelConfig mc = micro_config();
    ParamSet ps;
    init_model(ps, mc, 13);
    instantiate_aux_from_video(ps);
    auto base_table = orthogonal_table({"alpha", "beta"}, mc.vit.d);
    auto novel_table = orthogonal_table({"gamma", "delta"}, mc.vit.d);

    Rng rng(29);
    std::vector<EvalSample> base_set, novel_set;
    for (int i = 0; i < 60; ++i) {
        EvalSample s;
        s.views.push_back(random_view(mc, derive_seed(1, "b", i)));
        s.label = static_cast<int>(rng.integer(2));
        base_set.push_back(std::move(s));
    }
    for (int i = 0; i < 60; ++i) {
        EvalSample s;
        s.views.push_back(random_view(mc, derive_seed(1, "n", i)));
        s.label = static_cast<int>(rng.integer(2));
        novel_set.push_back(std::move(s));
    }

    InferenceConfig cfg;
    EvalReport r = evaluate(ps, mc, cfg, base_set, base_table, novel_set, novel_table);
    // Labels are independent of content, so accuracy is binomial around 50%.
    CHECK(r.base_acc > 20.0);
    CHECK(r.base_acc < 80.0);
    CHECK(r.novel_acc > 20.0);
    CHECK(r.novel_acc < 80.0);
    CHECK(r.hmean == doctest::Approx(harmonic_mean(r.base_acc, r.novel_acc)).epsilon(1e-12));
    CHECK(r.entropy_video >= 0.0);
    CHECK(r.entropy_aux >= 0.0);
}

TEST_CASE("evaluation scores a perfect oracle at 100/100/100") {
    ModelConfig mc = micro_config();
    ParamSet ps;
    init_model(ps, mc, 17);
    instantiate_aux_from_video(ps);

    // Build the tables out of the model's own features, one class per sample:
    // the fused video feature anchors the base rows, the fused auxiliary
    // feature anchors the novel rows (scored alone via beta = 1).
    std::vector<EvalSample> base_set, novel_set;
    EmbeddingTable base_table, novel_table;
    base_table.names = {"one", "two"};
    novel_table.names = {"three", "four"};
    base_table.embeddings = Tensor({2, mc.vit.d});
    novel_table.embeddings = Tensor({2, mc.vit.d});
    for (int c = 0; c < 2; ++c) {
        EvalSample s;
        s.views.push_back(random_view(mc, derive_seed(2, "base", c)));
        s.label = c;
        FusedFeatures f = model_forward(ps, mc, s.views[0]);
        double n = 0.0;
        for (int j = 0; j < mc.vit.d; ++j) n += f.v_m.at(j) * f.v_m.at(j);
        n = std::sqrt(n);
        for (int j = 0; j < mc.vit.d; ++j) base_table.embeddings.at(c, j) = f.v_m.at(j) / n;
        base_set.push_back(std::move(s));
    }
    for (int c = 0; c < 2; ++c) {
        EvalSample s;
        s.views.push_back(random_view(mc, derive_seed(2, "novel", c)));
        s.label = c;
        FusedFeatures f = model_forward(ps, mc, s.views[0]);
        double n = 0.0;
        for (int j = 0; j < mc.vit.d; ++j) n += f.x_m.at(j) * f.x_m.at(j);
        n = std::sqrt(n);
        for (int j = 0; j < mc.vit.d; ++j) novel_table.embeddings.at(c, j) = f.x_m.at(j) / n;
        novel_set.push_back(std::move(s));
    }

    InferenceConfig cfg;
    cfg.beta = 1.0;  // score the novel split purely on the auxiliary path
    EvalReport r = evaluate(ps, mc, cfg, base_set, base_table, novel_set, novel_table);
    CHECK(r.base_acc == 100.0);
    CHECK(r.novel_acc == 100.0);
    CHECK(r.hmean == doctest::Approx(100.0).epsilon(1e-12));
    for (const auto& [name, acc] : r.per_class_base) {
        CHECK(acc == 100.0);
        (void)name;
    }
}

TEST_CASE("evaluation rejects overlapping splits and bad labels") {
    ModelConfig mc = micro_config();
    ParamSet ps;
    init_model(ps, mc, 19);
    instantiate_aux_from_video(ps);
    auto base_table = orthogonal_table({"a", "b"}, mc.vit.d);
    auto overlap = orthogonal_table({"b", "c"}, mc.vit.d);
    InferenceConfig cfg;
    CHECK_THROWS_AS(evaluate(ps, mc, cfg, {}, base_table, {}, overlap), std::invalid_argument);

    auto novel_table = orthogonal_table({"c", "d"}, mc.vit.d);
    EvalSample bad;
    bad.views.push_back(random_view(mc, 5));
    bad.label = 2;
    CHECK_THROWS_AS(evaluate(ps, mc, cfg, {bad}, base_table, {}, novel_table),
                    std::invalid_argument);
    EvalSample empty_views;
    empty_views.label = 0;
    CHECK_THROWS_AS(evaluate(ps, mc, cfg, {}, base_table, {empty_views}, novel_table),
                    std::invalid_argument);
}

TEST_CASE("fusion mode wirings differ and stay valid") {
    ModelConfig mc = micro_config();
    ParamSet ps;
    init_model(ps, mc, 23);
    instantiate_aux_from_video(ps);
    auto base_table = orthogonal_table({"a", "b", "c"}, mc.vit.d);
    auto novel_table = orthogonal_table({"d", "e", "f"}, mc.vit.d);
    std::vector<EvalSample> base_set, novel_set;
    Rng rng(31);
    for (int i = 0; i < 6; ++i) {
        EvalSample s;
        s.views.push_back(random_view(mc, derive_seed(3, "s", i)));
        s.label = i % 3;
        (i % 2 == 0 ? base_set : novel_set).push_back(std::move(s));
    }

    for (const std::string mode : {"cross-attention", "video-only", "aux-only", "score-fusion"}) {
        InferenceConfig cfg;
        cfg.fusion_mode = mode;
        EvalReport r = evaluate(ps, mc, cfg, base_set, base_table, novel_set, novel_table);
        CHECK(r.base_acc >= 0.0);
        CHECK(r.base_acc <= 100.0);
        CHECK(r.novel_acc >= 0.0);
        CHECK(r.novel_acc <= 100.0);
        CHECK(r.hmean == doctest::Approx(harmonic_mean(r.base_acc, r.novel_acc)).epsilon(1e-12));
    }
}

TEST_CASE("reports round trip through JSON") {
    EvalReport r;
    r.base_acc = 62.5;
    r.novel_acc = 41.75;
    r.hmean = harmonic_mean(r.base_acc, r.novel_acc);
    r.per_class_base = {{"a", 100.0}, {"b", 25.0}};
    r.per_class_novel = {{"c", 50.0}};
    r.entropy_video = 1.25;
    r.entropy_aux = 0.875;

    fs::path path = fs::temp_directory_path() / "mov_eval_report.json";
    fs::remove(path);
    write_report(path.string(), r);
    EvalReport back = read_report(path.string());
    CHECK(back.base_acc == r.base_acc);
    CHECK(back.novel_acc == r.novel_acc);
    CHECK(back.hmean == r.hmean);
    CHECK(back.per_class_base == r.per_class_base);
    CHECK(back.per_class_novel == r.per_class_novel);
    CHECK(back.entropy_video == r.entropy_video);
    CHECK(back.entropy_aux == r.entropy_aux);

    CHECK_THROWS_AS(read_report((fs::temp_directory_path() / "mov_eval_nope.json").string()),
                    std::invalid_argument);
}
