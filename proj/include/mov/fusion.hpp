#pragma once

#include <cstdint>
#include <string>

#include "mov/graph.hpp"
#include "mov/params.hpp"
#include "mov/tensor.hpp"

namespace mov {

// Temporal fusion head: a small stack of pre-norm residual transformer layers
// run over the per-frame token sequence of one modality. There is no
// positional table here; the head sees the frames as an unordered set unless
// order information is already baked into the tokens.
struct TemporalHeadConfig {
    int d = 64;
    int layers = 2;
    int heads = 4;

    int mlp_hidden() const { return 4 * d; }
    void validate() const;
};

void init_temporal_head(ParamSet& ps, const std::string& prefix,
                        const TemporalHeadConfig& cfg, std::uint64_t seed);
Var temporal_fuse_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var tokens,
                        const TemporalHeadConfig& cfg);
Tensor temporal_fuse(const ParamSet& ps, const std::string& prefix, const Tensor& tokens,
                     const TemporalHeadConfig& cfg);

// The audio branch carries a single spectrogram token, so its "temporal" head
// degenerates to one MLP. Parameters live directly under the given prefix
// ({w1,b1,w2,b2}) and the forward pass is the shared mlp_block code path.
void init_audio_head(ParamSet& ps, const std::string& prefix, int d, int hidden,
                     std::uint64_t seed);
Var audio_temporal_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var token);
Tensor audio_temporal_head(const ParamSet& ps, const std::string& prefix, const Tensor& token);

// Decoder-style cross-attention layer: multi-head cross-attention with
// separate pre-norms for the query and key-value streams, a residual, then a
// pre-norm MLP residual. Query token count is preserved.
struct CrossHeadConfig {
    int d = 64;
    int heads = 4;

    int mlp_hidden() const { return 4 * d; }
    void validate() const;
};

void init_cross_head(ParamSet& ps, const std::string& prefix, const CrossHeadConfig& cfg,
                     std::uint64_t seed);
Var cross_attend_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var query, Var kv,
                       const CrossHeadConfig& cfg);
Tensor cross_attend(const ParamSet& ps, const std::string& prefix, const Tensor& query,
                    const Tensor& kv, const CrossHeadConfig& cfg);

// Fused pooled features. The video side queries its temporally fused tokens
// v_t against the auxiliary tokens x_t; the auxiliary side queries x_t
// against the raw backbone tokens v (not v_t), which keeps that path usable
// on classes the temporal head never trained on. Both end in an arithmetic
// mean over the query tokens.
Var fuse_video_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var v_t, Var x_t,
                     const CrossHeadConfig& cfg);
Var fuse_auxiliary_graph(Graph& g, ParamSet& ps, const std::string& prefix, Var x_t, Var v,
                         const CrossHeadConfig& cfg);
Tensor fuse_video(const ParamSet& ps, const std::string& prefix, const Tensor& v_t,
                  const Tensor& x_t, const CrossHeadConfig& cfg);
Tensor fuse_auxiliary(const ParamSet& ps, const std::string& prefix, const Tensor& x_t,
                      const Tensor& v, const CrossHeadConfig& cfg);

// AvgPool over tokens: [n,d] -> [d], plain arithmetic mean.
Tensor mean_rows(const Tensor& x);

}  // namespace mov
