#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mov/encoders.hpp"
#include "mov/fusion.hpp"
#include "mov/graph.hpp"
#include "mov/nn.hpp"
#include "mov/optim.hpp"
#include "mov/rng.hpp"

using namespace mov;

namespace {

Tensor random_tokens(int n, int d, std::uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    Tensor t({n, d});
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, scale);
    return t;
}

void zero_param(ParamSet& ps, const std::string& name) {
    Tensor& v = ps.state(name).value;
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = 0.0;
}

// Zeroing the attention and MLP output projections turns every residual
// branch into an exact no-op.
void zero_block_projections(ParamSet& ps, const std::string& block_prefix) {
    zero_param(ps, block_prefix + ".attn.wo");
    zero_param(ps, block_prefix + ".attn.bo");
    zero_param(ps, block_prefix + ".mlp.w2");
    zero_param(ps, block_prefix + ".mlp.b2");
}

// ---- independent straight-line oracle for one pre-norm block ----
// Everything below is flat loops on std::vector so a bug in the library's
// shared kernels cannot cancel out against itself.

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
    Mat m(t.extent(0), std::vector<double>(t.extent(1)));
    for (int i = 0; i < t.extent(0); ++i)
        for (int j = 0; j < t.extent(1); ++j) m[i][j] = t.at(i, j);
    return m;
}

Mat oracle_ln(const Mat& x, const Tensor& g, const Tensor& b) {
    Mat out = x;
    std::size_t d = x[0].size();
    for (auto& row : out) {
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= d;
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= d;
        double inv = 1.0 / std::sqrt(var + 1e-5);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = (row[j] - mean) * inv * g.at((int)j) + b.at((int)j);
        }
    }
    return out;
}

Mat oracle_linear(const Mat& x, const Tensor& w, const Tensor& b) {
    int dout = w.extent(0), din = w.extent(1);
    Mat out(x.size(), std::vector<double>(dout, 0.0));
    for (std::size_t r = 0; r < x.size(); ++r) {
        for (int o = 0; o < dout; ++o) {
            double s = b.at(o);
            for (int i = 0; i < din; ++i) s += x[r][i] * w.at(o, i);
            out[r][o] = s;
        }
    }
    return out;
}

double oracle_gelu(double x) {
    double k = 0.7978845608028654;
    return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

Mat oracle_mha(const Mat& q_in, const Mat& kv_in, const ParamSet& ps, const std::string& p,
               int heads) {
    Tensor wq = ps.value(p + ".wq"), wk = ps.value(p + ".wk"), wv = ps.value(p + ".wv");
    Tensor bq = ps.value(p + ".bq"), bk = ps.value(p + ".bk"), bv = ps.value(p + ".bv");
    Mat q = oracle_linear(q_in, wq, bq);
    Mat k = oracle_linear(kv_in, wk, bk);
    Mat v = oracle_linear(kv_in, wv, bv);
    int d = wq.extent(0), dh = d / heads;
    std::size_t nq = q_in.size(), nk = kv_in.size();
    Mat mixed(nq, std::vector<double>(d, 0.0));
    for (int h = 0; h < heads; ++h) {
        int c0 = h * dh;
        for (std::size_t r = 0; r < nq; ++r) {
            std::vector<double> score(nk);
            double mx = -1e300;
            for (std::size_t c = 0; c < nk; ++c) {
                double s = 0.0;
                for (int j = 0; j < dh; ++j) s += q[r][c0 + j] * k[c][c0 + j];
                score[c] = s / std::sqrt((double)dh);
                mx = std::max(mx, score[c]);
            }
            double z = 0.0;
            for (double& s : score) {
                s = std::exp(s - mx);
                z += s;
            }
            for (std::size_t c = 0; c < nk; ++c) {
                for (int j = 0; j < dh; ++j) mixed[r][c0 + j] += score[c] / z * v[c][c0 + j];
            }
        }
    }
    return oracle_linear(mixed, ps.value(p + ".wo"), ps.value(p + ".bo"));
}

Mat oracle_block(const Mat& x, const ParamSet& ps, const std::string& p, int heads) {
    Mat ln1 = oracle_ln(x, ps.value(p + ".ln1.g"), ps.value(p + ".ln1.b"));
    Mat attn = oracle_mha(ln1, ln1, ps, p + ".attn", heads);
    Mat y = x;
    for (std::size_t r = 0; r < y.size(); ++r)
        for (std::size_t j = 0; j < y[r].size(); ++j) y[r][j] += attn[r][j];
    Mat ln2 = oracle_ln(y, ps.value(p + ".ln2.g"), ps.value(p + ".ln2.b"));
    Mat h = oracle_linear(ln2, ps.value(p + ".mlp.w1"), ps.value(p + ".mlp.b1"));
    for (auto& row : h)
        for (double& v : row) v = oracle_gelu(v);
    Mat out = oracle_linear(h, ps.value(p + ".mlp.w2"), ps.value(p + ".mlp.b2"));
    for (std::size_t r = 0; r < out.size(); ++r)
        for (std::size_t j = 0; j < out[r].size(); ++j) out[r][j] += y[r][j];
    return out;
}

}  // namespace

TEST_CASE("temporal head: zeroed projections give an exact residual identity") {
    TemporalHeadConfig cfg{.d = 16, .layers = 2, .heads = 4};
    ParamSet ps;
    init_temporal_head(ps, "head.tv", cfg, 11);
    zero_block_projections(ps, "head.tv.block0");
    zero_block_projections(ps, "head.tv.block1");
    Tensor in = random_tokens(5, cfg.d, 301);
    Tensor out = temporal_fuse(ps, "head.tv", in, cfg);
    CHECK(bitwise_equal(out, in));
}

TEST_CASE("temporal head: single token attends to itself with weight one") {
    TemporalHeadConfig cfg{.d = 8, .layers = 1, .heads = 2};
    ParamSet ps;
    init_temporal_head(ps, "head.tv", cfg, 19);
    Tensor in = random_tokens(1, cfg.d, 77);

    Tensor ln1 = layer_norm(in, ps.value("head.tv.block0.ln1.g"), ps.value("head.tv.block0.ln1.b"));
    Tensor weights;
    multi_head_attention(ln1, ln1, ps, "head.tv.block0.attn", cfg.heads, &weights);
    REQUIRE(weights.rank() == 3);
    for (std::size_t i = 0; i < weights.size(); ++i) CHECK(weights.data()[i] == 1.0);

    Tensor out = temporal_fuse(ps, "head.tv", in, cfg);
    Mat expected = oracle_block(to_mat(in), ps, "head.tv.block0", cfg.heads);
    for (int j = 0; j < cfg.d; ++j) CHECK(out.at(0, j) == doctest::Approx(expected[0][j]).epsilon(1e-12));
}

TEST_CASE("temporal head: two layer stack matches a straight-line trace") {
    TemporalHeadConfig cfg{.d = 4, .layers = 2, .heads = 2};
    ParamSet ps;
    init_temporal_head(ps, "head.tf", cfg, 23);
    Tensor in = random_tokens(2, cfg.d, 501, 0.8);

    Tensor out = temporal_fuse(ps, "head.tf", in, cfg);
    REQUIRE(out.extent(0) == 2);
    REQUIRE(out.extent(1) == cfg.d);

    Mat trace = oracle_block(to_mat(in), ps, "head.tf.block0", cfg.heads);
    trace = oracle_block(trace, ps, "head.tf.block1", cfg.heads);
    for (int r = 0; r < 2; ++r)
        for (int j = 0; j < cfg.d; ++j)
            CHECK(std::abs(out.at(r, j) - trace[r][j]) < 1e-8);
}

TEST_CASE("temporal head: graph path agrees with the forward path") {
    TemporalHeadConfig cfg{.d = 8, .layers = 2, .heads = 4};
    ParamSet ps;
    init_temporal_head(ps, "head.tv", cfg, 31);
    Tensor in = random_tokens(4, cfg.d, 97);
    Graph g;
    Var out = temporal_fuse_graph(g, ps, "head.tv", g.constant(in), cfg);
    CHECK(approx_equal(out->value, temporal_fuse(ps, "head.tv", in, cfg), 1e-12));
}

TEST_CASE("temporal head: dimension mismatch is rejected") {
    TemporalHeadConfig cfg{.d = 8, .layers = 1, .heads = 2};
    ParamSet ps;
    init_temporal_head(ps, "head.tv", cfg, 5);
    CHECK_THROWS_AS(temporal_fuse(ps, "head.tv", random_tokens(3, 6, 1), cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(temporal_fuse(ps, "head.tv", Tensor({8}), cfg), std::invalid_argument);
}

TEST_CASE("audio head: zero weights give zero output") {
    ParamSet ps;
    init_audio_head(ps, "head.amlp", 6, 12, 3);
    for (const char* n : {".w1", ".b1", ".w2", ".b2"}) zero_param(ps, "head.amlp" + std::string(n));
    Tensor a = random_tokens(1, 6, 41);
    Tensor out = audio_temporal_head(ps, "head.amlp", a);
    REQUIRE(out.extent(0) == 1);
    for (int j = 0; j < 6; ++j) CHECK(out.at(0, j) == 0.0);
}

TEST_CASE("audio head: identity weights reduce to the activation") {
    ParamSet ps;
    init_audio_head(ps, "head.amlp", 5, 5, 3);
    for (const char* n : {".w1", ".b1", ".w2", ".b2"}) zero_param(ps, "head.amlp" + std::string(n));
    for (int i = 0; i < 5; ++i) {
        ps.state("head.amlp.w1").value.at(i, i) = 1.0;
        ps.state("head.amlp.w2").value.at(i, i) = 1.0;
    }
    Tensor a = random_tokens(1, 5, 43);
    Tensor out = audio_temporal_head(ps, "head.amlp", a);
    for (int j = 0; j < 5; ++j) CHECK(out.at(0, j) == doctest::Approx(gelu(a.at(0, j))).epsilon(1e-14));
}

TEST_CASE("audio head: matches mlp_block and the graph path") {
    ParamSet ps;
    init_audio_head(ps, "head.amlp", 8, 32, 7);
    Tensor a = random_tokens(1, 8, 47);
    Tensor out = audio_temporal_head(ps, "head.amlp", a);
    Tensor ref = mlp_block(a, ps, "head.amlp");
    CHECK(approx_equal(out, ref, 1e-12));

    Graph g;
    Var gv = audio_temporal_graph(g, ps, "head.amlp", g.constant(a));
    CHECK(approx_equal(gv->value, ref, 1e-12));

    CHECK_THROWS_AS(audio_temporal_head(ps, "head.amlp", random_tokens(1, 7, 1)),
                    std::invalid_argument);
}

TEST_CASE("video fusion: zeroed projections collapse to the token average") {
    CrossHeadConfig cfg{.d = 12, .heads = 4};
    ParamSet ps;
    init_cross_head(ps, "head.fusev", cfg, 13);
    zero_param(ps, "head.fusev.attn.wo");
    zero_param(ps, "head.fusev.attn.bo");
    zero_param(ps, "head.fusev.mlp.w2");
    zero_param(ps, "head.fusev.mlp.b2");
    Tensor v_t = random_tokens(6, cfg.d, 61);
    Tensor x_t = random_tokens(6, cfg.d, 62);
    Tensor v_m = fuse_video(ps, "head.fusev", v_t, x_t, cfg);
    CHECK(bitwise_equal(v_m, mean_rows(v_t)));
}

TEST_CASE("video fusion: a single key token adds the same increment to every query row") {
    CrossHeadConfig cfg{.d = 8, .heads = 2};
    ParamSet ps;
    init_cross_head(ps, "head.fusev", cfg, 17);
    // Silence the MLP branch so the residual exposes the raw attention rows.
    zero_param(ps, "head.fusev.mlp.w2");
    zero_param(ps, "head.fusev.mlp.b2");
    Tensor v_t = random_tokens(4, cfg.d, 71);
    Tensor a_t = random_tokens(1, cfg.d, 72);
    Tensor out = cross_attend(ps, "head.fusev", v_t, a_t, cfg);
    for (int r = 0; r < 4; ++r) {
        for (int j = 0; j < cfg.d; ++j) {
            double inc = out.at(r, j) - v_t.at(r, j);
            double inc0 = out.at(0, j) - v_t.at(0, j);
            CHECK(inc == doctest::Approx(inc0).epsilon(1e-14));
        }
    }
}

TEST_CASE("video fusion: permuting key tokens leaves the fused feature unchanged") {
    CrossHeadConfig cfg{.d = 8, .heads = 4};
    ParamSet ps;
    init_cross_head(ps, "head.fusev", cfg, 29);
    Tensor v_t = random_tokens(3, cfg.d, 81);
    Tensor x_t = random_tokens(3, cfg.d, 82);
    Tensor x_perm({3, cfg.d});
    int order[3] = {2, 0, 1};
    for (int r = 0; r < 3; ++r)
        for (int j = 0; j < cfg.d; ++j) x_perm.at(r, j) = x_t.at(order[r], j);
    Tensor a = fuse_video(ps, "head.fusev", v_t, x_t, cfg);
    Tensor b = fuse_video(ps, "head.fusev", v_t, x_perm, cfg);
    CHECK(approx_equal(a, b, 1e-12));
}

TEST_CASE("auxiliary fusion: zeroed projections collapse to the query average") {
    CrossHeadConfig cfg{.d = 10, .heads = 2};
    ParamSet ps;
    init_cross_head(ps, "head.fusex", cfg, 37);
    zero_param(ps, "head.fusex.attn.wo");
    zero_param(ps, "head.fusex.attn.bo");
    zero_param(ps, "head.fusex.mlp.w2");
    zero_param(ps, "head.fusex.mlp.b2");
    Tensor f_t = random_tokens(5, cfg.d, 91);
    Tensor v = random_tokens(5, cfg.d, 92);
    CHECK(bitwise_equal(fuse_auxiliary(ps, "head.fusex", f_t, v, cfg), mean_rows(f_t)));
}

TEST_CASE("auxiliary fusion: one audio query pools to its own fused token") {
    CrossHeadConfig cfg{.d = 8, .heads = 2};
    ParamSet ps;
    init_cross_head(ps, "head.fusex", cfg, 41);
    Tensor a_t = random_tokens(1, cfg.d, 101);
    Tensor v = random_tokens(6, cfg.d, 102);
    Tensor pooled = fuse_auxiliary(ps, "head.fusex", a_t, v, cfg);
    Tensor tokens = cross_attend(ps, "head.fusex", a_t, v, cfg);
    REQUIRE(pooled.rank() == 1);
    for (int j = 0; j < cfg.d; ++j) CHECK(pooled.at(j) == tokens.at(0, j));
}

TEST_CASE("auxiliary fusion: output depends on which video stream feeds the keys") {
    CrossHeadConfig cfg{.d = 8, .heads = 2};
    TemporalHeadConfig tcfg{.d = 8, .layers = 2, .heads = 2};
    ParamSet ps;
    init_cross_head(ps, "head.fusex", cfg, 43);
    init_temporal_head(ps, "head.tv", tcfg, 44);
    Tensor v = random_tokens(4, cfg.d, 111);
    Tensor v_t = temporal_fuse(ps, "head.tv", v, tcfg);
    REQUIRE(!approx_equal(v, v_t, 1e-6));  // the temporal head must not be an identity here
    Tensor f_t = random_tokens(4, cfg.d, 112);
    Tensor from_backbone = fuse_auxiliary(ps, "head.fusex", f_t, v, cfg);
    Tensor from_fused = fuse_auxiliary(ps, "head.fusex", f_t, v_t, cfg);
    CHECK(!approx_equal(from_backbone, from_fused, 1e-6));
}

TEST_CASE("cross head: graph path agrees with the forward path and checks shapes") {
    CrossHeadConfig cfg{.d = 8, .heads = 4};
    ParamSet ps;
    init_cross_head(ps, "head.fusev", cfg, 53);
    Tensor q = random_tokens(3, cfg.d, 121);
    Tensor kv = random_tokens(5, cfg.d, 122);
    Graph g;
    Var out = fuse_video_graph(g, ps, "head.fusev", g.constant(q), g.constant(kv), cfg);
    CHECK(approx_equal(out->value, fuse_video(ps, "head.fusev", q, kv, cfg), 1e-12));

    Tensor tokens = cross_attend(ps, "head.fusev", q, kv, cfg);
    CHECK(tokens.extent(0) == 3);
    CHECK(tokens.extent(1) == cfg.d);
    CHECK_THROWS_AS(cross_attend(ps, "head.fusev", random_tokens(3, 6, 1), kv, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(cross_attend(ps, "head.fusev", q, random_tokens(5, 6, 1), cfg),
                    std::invalid_argument);
}

TEST_CASE("fusion heads: gradients reach trainable heads but never frozen backbone tokens") {
    CrossHeadConfig cfg{.d = 8, .heads = 2};
    TemporalHeadConfig tcfg{.d = 8, .layers = 1, .heads = 2};
    ParamSet ps;
    init_cross_head(ps, "head.fusex", cfg, 59);
    init_temporal_head(ps, "head.tf", tcfg, 60);
    ps.get_or_create("backbone.v", {4, 8}, [](Tensor& t) {
        Rng rng(131);
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, 0.5);
    });
    ps.set_trainable("backbone.v", false);
    ps.get_or_create("aux.tokens", {4, 8}, [](Tensor& t) {
        Rng rng(132);
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, 0.5);
    });

    Graph g;
    Var f_t = temporal_fuse_graph(g, ps, "head.tf", g.param(ps, "aux.tokens"), tcfg);
    Var f_m = fuse_auxiliary_graph(g, ps, "head.fusex", f_t, g.param(ps, "backbone.v"), cfg);
    Var loss = g.sum_squares(f_m);
    g.backward(loss);
    auto grads = g.trainable_grads();

    CHECK(grads.count("backbone.v") == 0);
    REQUIRE(grads.count("aux.tokens") == 1);
    REQUIRE(grads.count("head.fusex.attn.wq") == 1);
    REQUIRE(grads.count("head.tf.block0.mlp.w1") == 1);
    double sum_aux = 0.0, sum_head = 0.0;
    for (std::size_t i = 0; i < grads.at("aux.tokens").size(); ++i)
        sum_aux += std::abs(grads.at("aux.tokens").data()[i]);
    for (std::size_t i = 0; i < grads.at("head.fusex.attn.wq").size(); ++i)
        sum_head += std::abs(grads.at("head.fusex.attn.wq").data()[i]);
    CHECK(sum_aux > 1e-8);
    CHECK(sum_head > 1e-8);
}

TEST_CASE("fusion heads: analytic gradients of the full fused pipeline check out") {
    CrossHeadConfig cfg{.d = 4, .heads = 2};
    TemporalHeadConfig tcfg{.d = 4, .layers = 1, .heads = 2};
    ParamSet ps;
    init_cross_head(ps, "head.fusev", cfg, 67);
    init_temporal_head(ps, "head.tv", tcfg, 68);
    Tensor frames = random_tokens(3, 4, 141);
    Tensor x_t = random_tokens(3, 4, 142);

    auto loss_fn = [&]() {
        Graph g;
        Var v_t = temporal_fuse_graph(g, ps, "head.tv", g.constant(frames), tcfg);
        Var v_m = fuse_video_graph(g, ps, "head.fusev", v_t, g.constant(x_t), cfg);
        return g.sum_squares(v_m)->value.at(0);
    };
    Graph g;
    Var v_t = temporal_fuse_graph(g, ps, "head.tv", g.constant(frames), tcfg);
    Var v_m = fuse_video_graph(g, ps, "head.fusev", v_t, g.constant(x_t), cfg);
    Var loss = g.sum_squares(v_m);
    g.backward(loss);
    double worst = grad_check(loss_fn, ps, g.trainable_grads(), 1e-5, 151, 24);
    CHECK(worst < 1e-4);
}
