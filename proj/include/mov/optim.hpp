#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "mov/params.hpp"

namespace mov {

struct AdamWConfig {
    double lr = 1e-4;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Decoupled-weight-decay Adam. Only trainable parameters move; gradient
// entries for frozen parameters are ignored. step counts from 1.
void adamw_step(ParamSet& params, const std::map<std::string, Tensor>& grads,
                const AdamWConfig& cfg, long step);

// Central-difference check of analytic gradients. scalar_fn must be a
// deterministic function of the parameter values. Samples at most
// max_coords coordinates per tensor (seeded), returns the max of
// |analytic - numeric| / max(1, |numeric|) over all sampled coordinates.
double grad_check(const std::function<double()>& scalar_fn, ParamSet& params,
                  const std::map<std::string, Tensor>& analytic, double epsilon,
                  std::uint64_t seed, int max_coords = 64);

}  // namespace mov
