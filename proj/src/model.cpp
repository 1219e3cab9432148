#include "mov/model.hpp"

#include <stdexcept>

namespace mov {

void ModelConfig::validate() const {
    vit.validate();
    thead.validate();
    xhead.validate();
    if (aux != "flow" && aux != "audio") {
        throw std::invalid_argument("auxiliary modality must be flow or audio");
    }
    if (vit.d != text.d || vit.d != thead.d || vit.d != xhead.d) {
        throw std::invalid_argument("embedding dimension must agree across towers and heads");
    }
    if (frames < 2 || stride < 1) throw std::invalid_argument("need at least two frames");
    if (audio_aux()) {
        if (mel_bins % vit.patch_size != 0 || crop_frames % vit.patch_size != 0) {
            throw std::invalid_argument("spectrogram extents must divide by the patch size");
        }
        if (time_mask_max < 0 || freq_mask_max < 0 || crop_frames < 1 || mel_bins < 1) {
            throw std::invalid_argument("bad spectrogram settings");
        }
    }
}

void init_model(ParamSet& ps, const ModelConfig& mc, std::uint64_t seed) {
    mc.validate();
    init_encoder_params(ps, kVideoEnc, mc.vit, seed);
    init_text_params(ps, kTextEnc, mc.text, seed);
    init_temporal_head(ps, kVideoHead, mc.thead, seed);
    if (mc.audio_aux()) {
        init_audio_head(ps, kAudioHead, mc.thead.d, mc.thead.mlp_hidden(), seed);
    } else {
        init_temporal_head(ps, kAuxHead, mc.thead, seed);
    }
    init_cross_head(ps, kFuseVideo, mc.xhead, seed);
    init_cross_head(ps, kFuseAux, mc.xhead, seed);
}

void instantiate_aux_from_video(ParamSet& ps) {
    ps.clone_prefix(std::string(kVideoEnc) + ".", std::string(kAuxEnc) + ".");
    for (const auto& name : ps.names()) {
        std::string prefix = std::string(kVideoEnc) + ".";
        if (name.rfind(prefix, 0) != 0) continue;
        std::string twin = std::string(kAuxEnc) + "." + name.substr(prefix.size());
        if (!ps.has(twin) || !bitwise_equal(ps.value(name), ps.value(twin))) {
            throw std::logic_error("auxiliary tower is not a bitwise clone of the video tower");
        }
    }
}

namespace {

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw std::invalid_argument("no feature rows to stack");
    int d = (int)rows[0].size();
    Tensor out({(int)rows.size(), d});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if ((int)rows[r].size() != d) throw std::invalid_argument("feature width mismatch");
        for (int j = 0; j < d; ++j) out.at((int)r, j) = rows[r].data()[j];
    }
    return out;
}

void check_view(const ModelConfig& mc, const SampleView& view) {
    if ((int)view.video_chw.size() != mc.frames) {
        throw std::invalid_argument("view frame count does not match the model config");
    }
    std::size_t want_aux = mc.audio_aux() ? 1 : (std::size_t)mc.frames;
    if (view.aux_chw.size() != want_aux) {
        throw std::invalid_argument("view auxiliary stream has the wrong length");
    }
}

}  // namespace

Tensor video_tokens(ParamSet& ps, const ModelConfig& mc,
                    const std::vector<Tensor>& video_chw) {
    std::vector<Tensor> rows;
    for (const auto& frame : video_chw) {
        rows.push_back(vit_encode(ps, kVideoEnc, mc.vit, frame));
    }
    return stack_rows(rows);
}

Tensor aux_tokens(ParamSet& ps, const ModelConfig& mc, const SampleView& view) {
    check_view(mc, view);
    std::vector<Tensor> rows;
    for (const auto& img : view.aux_chw) {
        rows.push_back(vit_encode(ps, kAuxEnc, mc.vit, img));
    }
    return stack_rows(rows);
}

FusedFeatures model_forward(ParamSet& ps, const ModelConfig& mc, const SampleView& view) {
    check_view(mc, view);
    FusedFeatures f;
    f.v_tokens = video_tokens(ps, mc, view.video_chw);
    f.v_pooled = mean_rows(f.v_tokens);
    Tensor x = aux_tokens(ps, mc, view);
    f.v_t = temporal_fuse(ps, kVideoHead, f.v_tokens, mc.thead);
    f.x_t = mc.audio_aux() ? audio_temporal_head(ps, kAudioHead, x)
                           : temporal_fuse(ps, kAuxHead, x, mc.thead);
    f.v_m = fuse_video(ps, kFuseVideo, f.v_t, f.x_t, mc.xhead);
    f.x_m = fuse_auxiliary(ps, kFuseAux, f.x_t, f.v_tokens, mc.xhead);
    return f;
}

Var aux_tokens_graph(Graph& g, ParamSet& ps, const ModelConfig& mc, const SampleView& view) {
    check_view(mc, view);
    std::vector<Var> rows;
    for (const auto& img : view.aux_chw) {
        Var cls = vit_encode_graph(g, ps, kAuxEnc, mc.vit, img);
        rows.push_back(g.reshape(cls, {1, mc.vit.d}));
    }
    return rows.size() == 1 ? rows[0] : g.vstack(rows);
}

Var video_branch_graph(Graph& g, ParamSet& ps, const ModelConfig& mc, Var v_tokens) {
    return temporal_fuse_graph(g, ps, kVideoHead, v_tokens, mc.thead);
}

Var aux_branch_graph(Graph& g, ParamSet& ps, const ModelConfig& mc, Var x_tokens) {
    return mc.audio_aux() ? audio_temporal_graph(g, ps, kAudioHead, x_tokens)
                          : temporal_fuse_graph(g, ps, kAuxHead, x_tokens, mc.thead);
}

}  // namespace mov
