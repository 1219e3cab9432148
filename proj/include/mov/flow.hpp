#pragma once

#include "mov/tensor.hpp"

namespace mov {

struct FlowParams {
    int pyramid_levels = 3;
    int warps = 2;
    int iterations = 30;
    double smoothness = 0.15;  // data-term weight λ
    double theta = 0.3;
    double tau = 0.25;
    double presmooth_sigma = 0.8;
};

// Dense optical flow via the duality-based TV-L1 primal-dual iteration on a
// coarse-to-fine pyramid. Inputs are [H,W,3] or [H,W] images; output is
// [H,W,2] with (u,v) in pixels/frame.
Tensor estimate_flow(const Tensor& prev, const Tensor& next, const FlowParams& params = {});

// Clamp u,v to [-20,20], map affinely to [0,255] with round-half-away-from-
// zero, and append an all-zero third channel -> [H,W,3].
Tensor flow_to_image(const Tensor& flow);

}  // namespace mov
