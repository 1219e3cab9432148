#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mov/encoders.hpp"
#include "mov/fusion.hpp"
#include "mov/graph.hpp"
#include "mov/params.hpp"
#include "mov/tensor.hpp"

namespace mov {

// Parameter namespaces of the assembled model. The video and text towers are
// frozen after alignment pretraining; the auxiliary tower starts as a bitwise
// clone of the video tower and is fine-tuned; the heads train from scratch.
inline constexpr const char* kVideoEnc = "enc.video";
inline constexpr const char* kTextEnc = "enc.text";
inline constexpr const char* kAuxEnc = "enc.aux";
inline constexpr const char* kVideoHead = "head.tvideo";
inline constexpr const char* kAuxHead = "head.taux";
inline constexpr const char* kAudioHead = "head.amlp";
inline constexpr const char* kFuseVideo = "head.fusev";
inline constexpr const char* kFuseAux = "head.fusex";

struct ModelConfig {
    VitConfig vit;
    TextConfig text;
    TemporalHeadConfig thead;
    CrossHeadConfig xhead;
    std::string aux = "flow";  // "flow" | "audio"
    int frames = 6;            // frames sampled per view
    int stride = 1;
    int mel_bins = 32;         // audio spectrogram geometry
    int crop_frames = 64;
    int time_mask_max = 16;
    int freq_mask_max = 12;

    bool audio_aux() const { return aux == "audio"; }
    void validate() const;
};

// One preprocessed clip view: normalized [3,H,W] video frames plus either one
// flow image per frame or a single [3,mel,time] spectrogram.
struct SampleView {
    std::vector<Tensor> video_chw;
    std::vector<Tensor> aux_chw;
};

void init_model(ParamSet& ps, const ModelConfig& mc, std::uint64_t seed);

// Clones the (pretrained) video tower into the auxiliary namespace and
// verifies the copy is bitwise identical.
void instantiate_aux_from_video(ParamSet& ps);

// Frozen-backbone per-frame class-token features, one row per frame.
Tensor video_tokens(ParamSet& ps, const ModelConfig& mc,
                    const std::vector<Tensor>& video_chw);
// Auxiliary-tower features: one row per flow frame, or a single spectrogram row.
Tensor aux_tokens(ParamSet& ps, const ModelConfig& mc, const SampleView& view);

struct FusedFeatures {
    Tensor v_tokens;  // [n,d] backbone video features
    Tensor v_pooled;  // [d] temporal average of v_tokens
    Tensor v_t;       // temporally fused video tokens
    Tensor x_t;       // temporally fused auxiliary tokens
    Tensor v_m;       // [d] fused multimodal video feature
    Tensor x_m;       // [d] fused multimodal auxiliary feature
};

FusedFeatures model_forward(ParamSet& ps, const ModelConfig& mc, const SampleView& view);

// Tape-side builders mirroring model_forward for the training loss. Video
// tokens enter as constants (the backbone is frozen); the auxiliary tower
// runs on the tape so its unfrozen layers receive gradients.
Var aux_tokens_graph(Graph& g, ParamSet& ps, const ModelConfig& mc, const SampleView& view);
Var video_branch_graph(Graph& g, ParamSet& ps, const ModelConfig& mc, Var v_tokens);
Var aux_branch_graph(Graph& g, ParamSet& ps, const ModelConfig& mc, Var x_tokens);

}  // namespace mov
