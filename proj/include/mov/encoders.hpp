#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mov/graph.hpp"
#include "mov/params.hpp"
#include "mov/tensor.hpp"

namespace mov {

struct VitConfig {
    int image_h = 32;
    int image_w = 32;
    int channels = 3;
    int patch_size = 8;
    int d = 64;
    int layers = 4;
    int heads = 4;

    int mlp_hidden() const { return 4 * d; }
    int grid_h() const { return image_h / patch_size; }
    int grid_w() const { return image_w / patch_size; }
    int tokens() const { return grid_h() * grid_w(); }
    void validate() const;
};

struct TextConfig {
    int vocab = 4096;
    int d = 64;
    int layers = 2;
    int heads = 4;
    int max_len = 16;

    int mlp_hidden() const { return 4 * d; }
};

// [C,H,W] image -> rows of flattened patches [n, C*ps*ps], row-major grid.
Tensor extract_patches(const Tensor& chw, int patch_size);

// [H,W,3] 0..255 image -> [3,H,W] scaled to [-1,1].
Tensor image_to_chw(const Tensor& hwc);

// Fixed bilinear mixing matrix over a (tokens+1)-row positional table: class
// row passes through, spatial rows are resized align-corners from the source
// grid to the destination grid.
Tensor pos_interp_matrix(int src_gh, int src_gw, int dst_gh, int dst_gw);
Tensor interpolate_pos_encoding(const Tensor& pe, int src_gh, int src_gw, int dst_gh,
                                int dst_gw);

void init_transformer_block(ParamSet& ps, const std::string& prefix, int d, int hidden,
                            std::uint64_t seed);
void init_encoder_params(ParamSet& ps, const std::string& prefix, const VitConfig& cfg,
                         std::uint64_t seed);
void init_text_params(ParamSet& ps, const std::string& prefix, const TextConfig& cfg,
                      std::uint64_t seed);

// Pre-norm residual block: y = MSA(LN(x)) + x; out = MLP(LN(y)) + y.
Var transformer_block_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var x,
                            int heads);
Tensor transformer_block_forward(const ParamSet& ps, const std::string& prefix,
                                 const Tensor& x, int heads);

// Full ViT tower on the tape: tokens+positions, cfg.layers blocks, final LN,
// class-token output [d]. Inputs whose grid differs from the config's native
// grid use the interpolated positional table.
Var vit_encode_graph(Graph& g, ParamSet& ps, const std::string& prefix, const VitConfig& cfg,
                     const Tensor& image_chw);
Tensor vit_encode(ParamSet& ps, const std::string& prefix, const VitConfig& cfg,
                  const Tensor& image_chw);

struct PromptSet {
    std::vector<std::string> templates;  // each contains exactly one "{}" slot

    static PromptSet default_set();
    void validate() const;
    std::string fill(std::size_t index, const std::string& name) const;
};

std::vector<int> tokenize_text(const std::string& text, int vocab);

Tensor encode_class(const std::string& name, const PromptSet& prompts, const ParamSet& ps,
                    const std::string& prefix, const TextConfig& cfg);

struct EmbeddingTable {
    std::vector<std::string> names;
    Tensor embeddings;  // [classes, d], unit-norm rows

    int size() const { return static_cast<int>(names.size()); }
};

EmbeddingTable build_embedding_table(const std::vector<std::string>& classes,
                                     const PromptSet& prompts, const ParamSet& ps,
                                     const std::string& prefix, const TextConfig& cfg);

}  // namespace mov
