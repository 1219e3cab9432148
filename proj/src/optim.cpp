#include "mov/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mov/rng.hpp"

namespace mov {

void adamw_step(ParamSet& params, const std::map<std::string, Tensor>& grads,
                const AdamWConfig& cfg, long step) {
    if (step < 1) throw std::invalid_argument("adamw step counts from 1");
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (const auto& [name, grad] : grads) {
        ParamState& st = params.state(name);
        if (!st.trainable) continue;
        if (grad.shape() != st.value.shape()) {
            throw std::invalid_argument("gradient shape mismatch for " + name);
        }
        for (std::size_t i = 0; i < st.value.size(); ++i) {
            double g = grad.data()[i];
            double& p = st.value.data()[i];
            p -= cfg.lr * cfg.weight_decay * p;
            double& m = st.m.data()[i];
            double& v = st.v.data()[i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            double mhat = m / bc1;
            double vhat = v / bc2;
            p -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        if (!st.value.all_finite()) {
            throw std::runtime_error("adamw produced non-finite values in " + name);
        }
    }
}

double grad_check(const std::function<double()>& scalar_fn, ParamSet& params,
                  const std::map<std::string, Tensor>& analytic, double epsilon,
                  std::uint64_t seed, int max_coords) {
    double worst = 0.0;
    for (const auto& [name, grad] : analytic) {
        if (!params.trainable(name)) continue;
        if (!grad.all_finite()) return std::numeric_limits<double>::infinity();
        Tensor& value = params.value(name);
        if (grad.shape() != value.shape()) {
            throw std::invalid_argument("analytic gradient shape mismatch for " + name);
        }
        std::size_t n = value.size();
        std::vector<std::size_t> coords;
        if (n <= static_cast<std::size_t>(max_coords)) {
            for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            Rng rng(derive_seed(seed, "grad_check." + name));
            for (int i = 0; i < max_coords; ++i) {
                coords.push_back(static_cast<std::size_t>(rng.integer(n)));
            }
        }
        for (std::size_t idx : coords) {
            double saved = value.data()[idx];
            value.data()[idx] = saved + epsilon;
            double fp = scalar_fn();
            value.data()[idx] = saved - epsilon;
            double fm = scalar_fn();
            value.data()[idx] = saved;
            double numeric = (fp - fm) / (2.0 * epsilon);
            double rel = std::fabs(grad.data()[idx] - numeric) /
                         std::max(1.0, std::fabs(numeric));
            if (!std::isfinite(rel)) return std::numeric_limits<double>::infinity();
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace mov
