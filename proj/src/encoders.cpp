#include "mov/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mov/nn.hpp"
#include "mov/rng.hpp"

namespace mov {

void VitConfig::validate() const {
    if (image_h <= 0 || image_w <= 0 || channels <= 0 || patch_size <= 0 || d <= 0 ||
        layers <= 0 || heads <= 0) {
        throw std::invalid_argument("encoder config fields must be positive");
    }
    if (image_h % patch_size != 0 || image_w % patch_size != 0) {
        throw std::invalid_argument("image extents must be divisible by the patch size");
    }
    if (d % heads != 0) {
        throw std::invalid_argument("embed dim must be divisible by the head count");
    }
}

Tensor extract_patches(const Tensor& chw, int patch_size) {
    if (chw.rank() != 3) throw std::invalid_argument("extract_patches expects [C,H,W]");
    int c = chw.extent(0), h = chw.extent(1), w = chw.extent(2);
    if (patch_size <= 0 || h % patch_size != 0 || w % patch_size != 0) {
        throw std::invalid_argument("image extents must be divisible by the patch size");
    }
    int gh = h / patch_size, gw = w / patch_size;
    Tensor out({gh * gw, c * patch_size * patch_size});
    for (int gy = 0; gy < gh; ++gy)
        for (int gx = 0; gx < gw; ++gx) {
            int row = gy * gw + gx;
            int col = 0;
            for (int ch = 0; ch < c; ++ch)
                for (int py = 0; py < patch_size; ++py)
                    for (int px = 0; px < patch_size; ++px) {
                        out.at(row, col++) =
                            chw.at(ch, gy * patch_size + py, gx * patch_size + px);
                    }
        }
    return out;
}

Tensor image_to_chw(const Tensor& hwc) {
    if (hwc.rank() != 3 || hwc.extent(2) != 3) {
        throw std::invalid_argument("image_to_chw expects [H,W,3]");
    }
    int h = hwc.extent(0), w = hwc.extent(1);
    Tensor out({3, h, w});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                out.at(c, y, x) = (hwc.at(y, x, c) / 255.0 - 0.5) / 0.5;
            }
    return out;
}

Tensor pos_interp_matrix(int src_gh, int src_gw, int dst_gh, int dst_gw) {
    if (src_gh <= 0 || src_gw <= 0 || dst_gh <= 0 || dst_gw <= 0) {
        throw std::invalid_argument("positional grids must be non-empty");
    }
    int src_n = src_gh * src_gw + 1, dst_n = dst_gh * dst_gw + 1;
    Tensor m({dst_n, src_n});
    m.at(0, 0) = 1.0;  // class-token row passes through
    for (int y = 0; y < dst_gh; ++y)
        for (int x = 0; x < dst_gw; ++x) {
            double sy = dst_gh == 1 ? 0.0
                                    : static_cast<double>(y) * (src_gh - 1) / (dst_gh - 1);
            double sx = dst_gw == 1 ? 0.0
                                    : static_cast<double>(x) * (src_gw - 1) / (dst_gw - 1);
            int y0 = static_cast<int>(std::floor(sy));
            int x0 = static_cast<int>(std::floor(sx));
            int y1 = std::min(y0 + 1, src_gh - 1);
            int x1 = std::min(x0 + 1, src_gw - 1);
            double fy = sy - y0, fx = sx - x0;
            int row = 1 + y * dst_gw + x;
            m.at(row, 1 + y0 * src_gw + x0) += (1 - fy) * (1 - fx);
            m.at(row, 1 + y0 * src_gw + x1) += (1 - fy) * fx;
            m.at(row, 1 + y1 * src_gw + x0) += fy * (1 - fx);
            m.at(row, 1 + y1 * src_gw + x1) += fy * fx;
        }
    return m;
}

Tensor interpolate_pos_encoding(const Tensor& pe, int src_gh, int src_gw, int dst_gh,
                                int dst_gw) {
    if (pe.rank() != 2 || pe.extent(0) != src_gh * src_gw + 1) {
        throw std::invalid_argument("positional table rows must match the source grid + 1");
    }
    return matmul(pos_interp_matrix(src_gh, src_gw, dst_gh, dst_gw), pe);
}

namespace {

auto normal_init(std::uint64_t seed, const std::string& name, double stddev) {
    return [seed, name, stddev](Tensor& t) {
        Rng rng(derive_seed(seed, "init." + name));
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, stddev);
    };
}

void init_weight(ParamSet& ps, const std::string& name, std::vector<int> shape,
                 std::uint64_t seed, double stddev = 0.02) {
    ps.get_or_create(name, std::move(shape), normal_init(seed, name, stddev));
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

void init_transformer_block(ParamSet& ps, const std::string& prefix, int d, int hidden,
                            std::uint64_t seed) {
    init_ones(ps, prefix + ".ln1.g", {d});
    init_zeros(ps, prefix + ".ln1.b", {d});
    for (const char* n : {"wq", "wk", "wv", "wo"}) {
        init_weight(ps, prefix + ".attn." + std::string(n), {d, d}, seed);
    }
    for (const char* n : {"bq", "bk", "bv", "bo"}) {
        init_zeros(ps, prefix + ".attn." + std::string(n), {d});
    }
    init_ones(ps, prefix + ".ln2.g", {d});
    init_zeros(ps, prefix + ".ln2.b", {d});
    init_weight(ps, prefix + ".mlp.w1", {hidden, d}, seed);
    init_zeros(ps, prefix + ".mlp.b1", {hidden});
    init_weight(ps, prefix + ".mlp.w2", {d, hidden}, seed);
    init_zeros(ps, prefix + ".mlp.b2", {d});
}

void init_encoder_params(ParamSet& ps, const std::string& prefix, const VitConfig& cfg,
                         std::uint64_t seed) {
    cfg.validate();
    int patch_in = cfg.channels * cfg.patch_size * cfg.patch_size;
    init_weight(ps, prefix + ".patch.w", {cfg.d, patch_in}, seed);
    init_zeros(ps, prefix + ".patch.b", {cfg.d});
    init_weight(ps, prefix + ".cls", {1, cfg.d}, seed);
    init_weight(ps, prefix + ".pos", {cfg.tokens() + 1, cfg.d}, seed, 0.01);
    for (int l = 0; l < cfg.layers; ++l) {
        init_transformer_block(ps, prefix + ".block" + std::to_string(l), cfg.d,
                               cfg.mlp_hidden(), seed);
    }
    init_ones(ps, prefix + ".final_ln.g", {cfg.d});
    init_zeros(ps, prefix + ".final_ln.b", {cfg.d});
}

void init_text_params(ParamSet& ps, const std::string& prefix, const TextConfig& cfg,
                      std::uint64_t seed) {
    if (cfg.vocab <= 0 || cfg.d <= 0 || cfg.layers <= 0 || cfg.max_len <= 0 ||
        cfg.d % cfg.heads != 0) {
        throw std::invalid_argument("bad text encoder config");
    }
    init_weight(ps, prefix + ".tok", {cfg.vocab, cfg.d}, seed);
    init_weight(ps, prefix + ".pos", {cfg.max_len, cfg.d}, seed, 0.01);
    for (int l = 0; l < cfg.layers; ++l) {
        init_transformer_block(ps, prefix + ".block" + std::to_string(l), cfg.d,
                               cfg.mlp_hidden(), seed);
    }
    init_ones(ps, prefix + ".final_ln.g", {cfg.d});
    init_zeros(ps, prefix + ".final_ln.b", {cfg.d});
}

Var transformer_block_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var x,
                            int heads) {
    Var ln1 = g.layer_norm(x, g.param(ps, prefix + ".ln1.g"), g.param(ps, prefix + ".ln1.b"));
    Var attn = g.multi_head_attention(
        ln1, ln1, g.param(ps, prefix + ".attn.wq"), g.param(ps, prefix + ".attn.bq"),
        g.param(ps, prefix + ".attn.wk"), g.param(ps, prefix + ".attn.bk"),
        g.param(ps, prefix + ".attn.wv"), g.param(ps, prefix + ".attn.bv"),
        g.param(ps, prefix + ".attn.wo"), g.param(ps, prefix + ".attn.bo"), heads);
    Var y = g.add(attn, x);
    Var ln2 = g.layer_norm(y, g.param(ps, prefix + ".ln2.g"), g.param(ps, prefix + ".ln2.b"));
    Var h = g.linear(ln2, g.param(ps, prefix + ".mlp.w1"), g.param(ps, prefix + ".mlp.b1"));
    Var mlp = g.linear(g.gelu(h), g.param(ps, prefix + ".mlp.w2"),
                       g.param(ps, prefix + ".mlp.b2"));
    return g.add(mlp, y);
}

Tensor transformer_block_forward(const ParamSet& ps, const std::string& prefix,
                                 const Tensor& x, int heads) {
    Tensor ln1 = layer_norm(x, ps.value(prefix + ".ln1.g"), ps.value(prefix + ".ln1.b"));
    Tensor attn = multi_head_attention(ln1, ln1, ps, prefix + ".attn", heads);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] = attn.data()[i] + x.data()[i];
    Tensor ln2 = layer_norm(y, ps.value(prefix + ".ln2.g"), ps.value(prefix + ".ln2.b"));
    Tensor mlp = mlp_block(ln2, ps, prefix + ".mlp");
    for (std::size_t i = 0; i < y.size(); ++i) mlp.data()[i] += y.data()[i];
    return mlp;
}

Var vit_encode_graph(Graph& g, ParamSet& ps, const std::string& prefix, const VitConfig& cfg,
                     const Tensor& image_chw) {
    cfg.validate();
    if (image_chw.rank() != 3 || image_chw.extent(0) != cfg.channels) {
        throw std::invalid_argument("encoder input must be [C,H,W] with matching channels");
    }
    int h = image_chw.extent(1), w = image_chw.extent(2);
    if (h % cfg.patch_size != 0 || w % cfg.patch_size != 0) {
        throw std::invalid_argument("input extents must be divisible by the patch size");
    }
    int gh = h / cfg.patch_size, gw = w / cfg.patch_size;
    Var patches = g.constant(extract_patches(image_chw, cfg.patch_size));
    Var tok = g.linear(patches, g.param(ps, prefix + ".patch.w"),
                       g.param(ps, prefix + ".patch.b"));
    Var seq = g.vstack({g.param(ps, prefix + ".cls"), tok});
    Var pos = g.param(ps, prefix + ".pos");
    if (gh != cfg.grid_h() || gw != cfg.grid_w()) {
        pos = g.fixed_mix(pos_interp_matrix(cfg.grid_h(), cfg.grid_w(), gh, gw), pos);
    }
    Var x = g.add(seq, pos);
    for (int l = 0; l < cfg.layers; ++l) {
        x = transformer_block_graph(g, ps, prefix + ".block" + std::to_string(l), x, cfg.heads);
    }
    Var out = g.layer_norm(x, g.param(ps, prefix + ".final_ln.g"),
                           g.param(ps, prefix + ".final_ln.b"));
    return g.slice_row(out, 0);
}

Tensor vit_encode(ParamSet& ps, const std::string& prefix, const VitConfig& cfg,
                  const Tensor& image_chw) {
    Graph g;
    return vit_encode_graph(g, ps, prefix, cfg, image_chw)->value;
}

PromptSet PromptSet::default_set() {
    PromptSet p;
    p.templates = {
        "a video of a person doing {}",
        "a video of {}",
        "a clip of {}",
        "a recording of {}",
        "a person doing {}",
        "someone doing {}",
        "footage of {}",
        "a short video of {}",
        "a long video of {}",
        "a blurry video of {}",
        "a clear video of {}",
        "a close-up video of {}",
        "a wide shot of {}",
        "an example of {}",
        "a demonstration of {}",
        "an action of {}",
        "the activity of {}",
        "a scene of {}",
        "a moment of {}",
        "a take of {}",
        "home footage of {}",
        "a tutorial of {}",
        "a practice of {}",
        "a performance of {}",
        "an attempt at {}",
        "a video showing {}",
        "a camera capture of {}",
        "one more video of {}",
    };
    return p;
}

void PromptSet::validate() const {
    if (templates.empty()) throw std::invalid_argument("prompt set must be non-empty");
    for (const auto& t : templates) {
        std::size_t first = t.find("{}");
        if (first == std::string::npos || t.find("{}", first + 1) != std::string::npos) {
            throw std::invalid_argument("each template needs exactly one {} slot: " + t);
        }
    }
}

std::string PromptSet::fill(std::size_t index, const std::string& name) const {
    const std::string& t = templates.at(index);
    std::string out = t;
    out.replace(out.find("{}"), 2, name);
    return out;
}

std::vector<int> tokenize_text(const std::string& text, int vocab) {
    if (vocab <= 0) throw std::invalid_argument("vocabulary size must be positive");
    std::vector<int> ids;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            ids.push_back(static_cast<int>(fnv1a64(word) % static_cast<std::uint64_t>(vocab)));
            word.clear();
        }
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return ids;
}

Tensor encode_class(const std::string& name, const PromptSet& prompts, const ParamSet& ps,
                    const std::string& prefix, const TextConfig& cfg) {
    if (name.empty()) throw std::invalid_argument("class name must be non-empty");
    prompts.validate();
    const Tensor& tok = ps.value(prefix + ".tok");
    const Tensor& pos = ps.value(prefix + ".pos");
    Tensor acc({cfg.d});
    for (std::size_t t = 0; t < prompts.templates.size(); ++t) {
        std::string filled = prompts.fill(t, name);
        std::vector<int> ids = tokenize_text(filled, cfg.vocab);
        if (ids.empty()) throw std::invalid_argument("prompt tokenized to nothing: " + filled);
        int len = std::min<int>(static_cast<int>(ids.size()), cfg.max_len);
        Tensor x({len, cfg.d});
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < cfg.d; ++j) {
                x.at(i, j) = tok.at(ids[static_cast<std::size_t>(i)], j) + pos.at(i, j);
            }
        for (int l = 0; l < cfg.layers; ++l) {
            x = transformer_block_forward(ps, prefix + ".block" + std::to_string(l), x,
                                          cfg.heads);
        }
        x = layer_norm(x, ps.value(prefix + ".final_ln.g"), ps.value(prefix + ".final_ln.b"));
        Tensor pooled({cfg.d});
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < cfg.d; ++j) pooled.at(j) += x.at(i, j) / len;
        pooled = l2_normalized(pooled);
        for (int j = 0; j < cfg.d; ++j) acc.at(j) += pooled.at(j);
    }
    return l2_normalized(acc);
}

EmbeddingTable build_embedding_table(const std::vector<std::string>& classes,
                                     const PromptSet& prompts, const ParamSet& ps,
                                     const std::string& prefix, const TextConfig& cfg) {
    std::set<std::string> unique(classes.begin(), classes.end());
    if (unique.size() != classes.size()) {
        throw std::invalid_argument("class names must be unique");
    }
    if (classes.empty()) throw std::invalid_argument("class list must be non-empty");
    EmbeddingTable table;
    table.names = classes;
    table.embeddings = Tensor({static_cast<int>(classes.size()), cfg.d});
    for (std::size_t i = 0; i < classes.size(); ++i) {
        Tensor e = encode_class(classes[i], prompts, ps, prefix, cfg);
        for (int j = 0; j < cfg.d; ++j) table.embeddings.at(static_cast<int>(i), j) = e.at(j);
    }
    return table;
}

}  // namespace mov
