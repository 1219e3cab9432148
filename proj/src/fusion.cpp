#include "mov/fusion.hpp"

#include <stdexcept>

#include "mov/encoders.hpp"
#include "mov/nn.hpp"
#include "mov/rng.hpp"

namespace mov {

namespace {

void check_tokens(const Tensor& t, int d, const char* what) {
    if (t.rank() != 2 || t.extent(0) < 1 || t.extent(1) != d) {
        throw std::invalid_argument(std::string(what) + " must be [n," + std::to_string(d) +
                                    "] with n >= 1");
    }
}

void init_normal(ParamSet& ps, const std::string& name, std::vector<int> shape,
                 std::uint64_t seed, double stddev) {
    ps.get_or_create(name, std::move(shape), [seed, name, stddev](Tensor& t) {
        Rng rng(derive_seed(seed, "init." + name));
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, stddev);
    });
}

void init_zeros(ParamSet& ps, const std::string& name, std::vector<int> shape) {
    ps.get_or_create(name, std::move(shape), [](Tensor&) {});
}

void init_ones(ParamSet& ps, const std::string& name, std::vector<int> shape) {
    ps.get_or_create(name, std::move(shape), [](Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = 1.0;
    });
}

}  // namespace

void TemporalHeadConfig::validate() const {
    if (d <= 0 || layers <= 0 || heads <= 0 || d % heads != 0) {
        throw std::invalid_argument("bad temporal head config");
    }
}

void CrossHeadConfig::validate() const {
    if (d <= 0 || heads <= 0 || d % heads != 0) {
        throw std::invalid_argument("bad cross head config");
    }
}

void init_temporal_head(ParamSet& ps, const std::string& prefix,
                        const TemporalHeadConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    for (int l = 0; l < cfg.layers; ++l) {
        init_transformer_block(ps, prefix + ".block" + std::to_string(l), cfg.d,
                               cfg.mlp_hidden(), seed);
    }
}

Var temporal_fuse_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var tokens,
                        const TemporalHeadConfig& cfg) {
    cfg.validate();
    check_tokens(tokens->value, cfg.d, "temporal head input");
    Var x = tokens;
    for (int l = 0; l < cfg.layers; ++l) {
        x = transformer_block_graph(g, ps, prefix + ".block" + std::to_string(l), x, cfg.heads);
    }
    return x;
}

Tensor temporal_fuse(const ParamSet& ps, const std::string& prefix, const Tensor& tokens,
                     const TemporalHeadConfig& cfg) {
    cfg.validate();
    check_tokens(tokens, cfg.d, "temporal head input");
    Tensor x = tokens;
    for (int l = 0; l < cfg.layers; ++l) {
        x = transformer_block_forward(ps, prefix + ".block" + std::to_string(l), x, cfg.heads);
    }
    return x;
}

void init_audio_head(ParamSet& ps, const std::string& prefix, int d, int hidden,
                     std::uint64_t seed) {
    if (d <= 0 || hidden <= 0) throw std::invalid_argument("bad audio head dims");
    init_normal(ps, prefix + ".w1", {hidden, d}, seed, 0.02);
    init_zeros(ps, prefix + ".b1", {hidden});
    init_normal(ps, prefix + ".w2", {d, hidden}, seed, 0.02);
    init_zeros(ps, prefix + ".b2", {d});
}

Var audio_temporal_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var token) {
    const Tensor& w1 = ps.value(prefix + ".w1");
    check_tokens(token->value, w1.extent(1), "audio head input");
    Var h = g.linear(token, g.param(ps, prefix + ".w1"), g.param(ps, prefix + ".b1"));
    return g.linear(g.gelu(h), g.param(ps, prefix + ".w2"), g.param(ps, prefix + ".b2"));
}

Tensor audio_temporal_head(const ParamSet& ps, const std::string& prefix, const Tensor& token) {
    check_tokens(token, ps.value(prefix + ".w1").extent(1), "audio head input");
    return mlp_block(token, ps, prefix);
}

void init_cross_head(ParamSet& ps, const std::string& prefix, const CrossHeadConfig& cfg,
                     std::uint64_t seed) {
    cfg.validate();
    init_ones(ps, prefix + ".lnq.g", {cfg.d});
    init_zeros(ps, prefix + ".lnq.b", {cfg.d});
    init_ones(ps, prefix + ".lnkv.g", {cfg.d});
    init_zeros(ps, prefix + ".lnkv.b", {cfg.d});
    for (const char* n : {"wq", "wk", "wv", "wo"}) {
        init_normal(ps, prefix + ".attn." + std::string(n), {cfg.d, cfg.d}, seed, 0.02);
    }
    for (const char* n : {"bq", "bk", "bv", "bo"}) {
        init_zeros(ps, prefix + ".attn." + std::string(n), {cfg.d});
    }
    init_ones(ps, prefix + ".ln2.g", {cfg.d});
    init_zeros(ps, prefix + ".ln2.b", {cfg.d});
    init_normal(ps, prefix + ".mlp.w1", {cfg.mlp_hidden(), cfg.d}, seed, 0.02);
    init_zeros(ps, prefix + ".mlp.b1", {cfg.mlp_hidden()});
    init_normal(ps, prefix + ".mlp.w2", {cfg.d, cfg.mlp_hidden()}, seed, 0.02);
    init_zeros(ps, prefix + ".mlp.b2", {cfg.d});
}

Var cross_attend_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var query, Var kv,
                       const CrossHeadConfig& cfg) {
    cfg.validate();
    check_tokens(query->value, cfg.d, "cross attention query");
    check_tokens(kv->value, cfg.d, "cross attention key-value");
    Var qn = g.layer_norm(query, g.param(ps, prefix + ".lnq.g"), g.param(ps, prefix + ".lnq.b"));
    Var kn = g.layer_norm(kv, g.param(ps, prefix + ".lnkv.g"), g.param(ps, prefix + ".lnkv.b"));
    Var attn = g.multi_head_attention(
        qn, kn, g.param(ps, prefix + ".attn.wq"), g.param(ps, prefix + ".attn.bq"),
        g.param(ps, prefix + ".attn.wk"), g.param(ps, prefix + ".attn.bk"),
        g.param(ps, prefix + ".attn.wv"), g.param(ps, prefix + ".attn.bv"),
        g.param(ps, prefix + ".attn.wo"), g.param(ps, prefix + ".attn.bo"), cfg.heads);
    Var y = g.add(attn, query);
    Var ln2 = g.layer_norm(y, g.param(ps, prefix + ".ln2.g"), g.param(ps, prefix + ".ln2.b"));
    Var h = g.linear(ln2, g.param(ps, prefix + ".mlp.w1"), g.param(ps, prefix + ".mlp.b1"));
    Var mlp = g.linear(g.gelu(h), g.param(ps, prefix + ".mlp.w2"), g.param(ps, prefix + ".mlp.b2"));
    return g.add(mlp, y);
}

Tensor cross_attend(const ParamSet& ps, const std::string& prefix, const Tensor& query,
                    const Tensor& kv, const CrossHeadConfig& cfg) {
    cfg.validate();
    check_tokens(query, cfg.d, "cross attention query");
    check_tokens(kv, cfg.d, "cross attention key-value");
    Tensor qn = layer_norm(query, ps.value(prefix + ".lnq.g"), ps.value(prefix + ".lnq.b"));
    Tensor kn = layer_norm(kv, ps.value(prefix + ".lnkv.g"), ps.value(prefix + ".lnkv.b"));
    Tensor attn = multi_head_attention(qn, kn, ps, prefix + ".attn", cfg.heads);
    Tensor y(query.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = attn.data()[i] + query.data()[i];
    Tensor ln2 = layer_norm(y, ps.value(prefix + ".ln2.g"), ps.value(prefix + ".ln2.b"));
    Tensor mlp = mlp_block(ln2, ps, prefix + ".mlp");
    for (std::size_t i = 0; i < mlp.size(); ++i) mlp.data()[i] += y.data()[i];
    return mlp;
}

Var fuse_video_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var v_t, Var x_t,
                     const CrossHeadConfig& cfg) {
    return g.mean_rows(cross_attend_graph(g, ps, prefix, v_t, x_t, cfg));
}

Var fuse_auxiliary_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var x_t, Var v,
                         const CrossHeadConfig& cfg) {
    return g.mean_rows(cross_attend_graph(g, ps, prefix, x_t, v, cfg));
}

Tensor fuse_video(const ParamSet& ps, const std::string& prefix, const Tensor& v_t,
                  const Tensor& x_t, const CrossHeadConfig& cfg) {
    return mean_rows(cross_attend(ps, prefix, v_t, x_t, cfg));
}

Tensor fuse_auxiliary(const ParamSet& ps, const std::string& prefix, const Tensor& x_t,
                      const Tensor& v, const CrossHeadConfig& cfg) {
    return mean_rows(cross_attend(ps, prefix, x_t, v, cfg));
}

Tensor mean_rows(const Tensor& x) {
    if (x.rank() != 2) throw std::invalid_argument("mean_rows expects rank 2");
    int n = x.extent(0), d = x.extent(1);
    Tensor out({d});
    for (int r = 0; r < n; ++r)
        for (int j = 0; j < d; ++j) out.at(j) += x.at(r, j);
    for (int j = 0; j < d; ++j) out.at(j) /= n;
    return out;
}

}  // namespace mov
