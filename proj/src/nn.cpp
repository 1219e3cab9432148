#include "mov/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mov {

ProbabilityVector::ProbabilityVector(Tensor values) : values_(std::move(values)) {
    if (values_.rank() != 1 || values_.extent(0) == 0) {
        throw std::invalid_argument("probability vector must be non-empty rank 1");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        double p = values_.data()[i];
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("probability entries must lie in [0,1]");
        }
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
        throw std::invalid_argument("probability entries must sum to 1");
    }
}

int ProbabilityVector::argmax() const {
    int best = 0;
    for (int i = 1; i < size(); ++i) {
        if (values_.at(i) > values_.at(best)) best = i;
    }
    return best;
}

ProbabilityVector softmax(const Tensor& logits, double temperature) {
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("softmax temperature must be positive");
    }
    if (logits.rank() != 1 || logits.extent(0) == 0) {
        throw std::invalid_argument("softmax expects a non-empty rank-1 tensor");
    }
    if (!logits.all_finite()) {
        throw std::invalid_argument("softmax input must be finite");
    }
    int n = logits.extent(0);
    double mx = logits.at(0) / temperature;
    for (int i = 1; i < n; ++i) mx = std::max(mx, logits.at(i) / temperature);
    Tensor out({n});
    double denom = 0.0;
    for (int i = 0; i < n; ++i) {
        double e = std::exp(logits.at(i) / temperature - mx);
        out.at(i) = e;
        denom += e;
    }
    for (int i = 0; i < n; ++i) out.at(i) /= denom;
    return ProbabilityVector(std::move(out));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
    int d = x.extent(x.rank() - 1);
    if (gain.rank() != 1 || bias.rank() != 1 || gain.extent(0) != d || bias.extent(0) != d) {
        throw std::invalid_argument("layer_norm gain/bias must match the last axis");
    }
    Tensor out(x.shape());
    std::size_t rows = x.size() / static_cast<std::size_t>(d);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * static_cast<std::size_t>(d);
        double* yr = out.data() + r * static_cast<std::size_t>(d);
        double mean = 0.0;
        for (int i = 0; i < d; ++i) mean += xr[i];
        mean /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) {
            double c = xr[i] - mean;
            var += c * c;
        }
        var /= d;
        double inv = 1.0 / std::sqrt(var + epsilon);
        for (int i = 0; i < d; ++i) {
            yr[i] = (xr[i] - mean) * inv * gain.at(i) + bias.at(i);
        }
    }
    return out;
}

double gelu(double x) {
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

Tensor gelu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = gelu(x.data()[i]);
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw std::invalid_argument("matmul shape mismatch");
    }
    int m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor out({m, n});
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    for (int i = 0; i < m; ++i) {
        double* orow = od + (std::size_t)i * n;
        for (int p = 0; p < k; ++p) {
            double av = ad[(std::size_t)i * k + p];
            const double* brow = bd + (std::size_t)p * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(1)) {
        throw std::invalid_argument("matmul_nt shape mismatch");
    }
    int m = a.extent(0), k = a.extent(1), n = b.extent(0);
    Tensor out({m, n});
    const double* ad = a.data();
    const double* bd = b.data();
    double* od = out.data();
    for (int i = 0; i < m; ++i) {
        const double* arow = ad + (std::size_t)i * k;
        for (int j = 0; j < n; ++j) {
            const double* brow = bd + (std::size_t)j * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            od[(std::size_t)i * n + j] = s;
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument("transpose expects rank 2");
    Tensor out({a.extent(1), a.extent(0)});
    for (int i = 0; i < a.extent(0); ++i)
        for (int j = 0; j < a.extent(1); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.extent(1) != w.extent(1) ||
        w.extent(0) != b.extent(0)) {
        throw std::invalid_argument("linear shape mismatch");
    }
    Tensor out = matmul_nt(x, w);
    for (int i = 0; i < out.extent(0); ++i)
        for (int j = 0; j < out.extent(1); ++j) out.at(i, j) += b.at(j);
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("dot shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

Tensor l2_normalized(const Tensor& a) {
    double n = l2_norm(a);
    if (n <= 0.0) throw std::invalid_argument("cannot normalize a zero vector");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] / n;
    return out;
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1 || a.extent(0) != b.extent(0)) {
        throw std::invalid_argument("cosine_similarity expects matching rank-1 tensors");
    }
    double na = l2_norm(a), nb = l2_norm(b);
    if (na <= 0.0 || nb <= 0.0) {
        throw std::invalid_argument("cosine_similarity requires non-zero norms");
    }
    return dot(a, b) / (na * nb);
}

double half_cosine_lr(double base_lr, long step, long total_steps) {
    if (total_steps <= 0) throw std::invalid_argument("total_steps must be positive");
    if (step < 0) throw std::invalid_argument("step must be non-negative");
    if (step > total_steps) step = total_steps;
    double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

double entropy(const ProbabilityVector& p) {
    double h = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        double v = p[i];
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

Tensor multi_head_attention(const Tensor& query_in, const Tensor& kv_in,
                            const ParamSet& params, const std::string& prefix, int heads,
                            Tensor* attn_out) {
    if (query_in.rank() != 2 || kv_in.rank() != 2 || query_in.extent(1) != kv_in.extent(1)) {
        throw std::invalid_argument("attention inputs must be rank 2 with matching width");
    }
    int d = query_in.extent(1);
    if (heads <= 0 || d % heads != 0) {
        throw std::invalid_argument("attention width must be divisible by head count");
    }
    int dh = d / heads;
    int nq = query_in.extent(0), nk = kv_in.extent(0);
    double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor q = linear(query_in, params.value(prefix + ".wq"), params.value(prefix + ".bq"));
    Tensor k = linear(kv_in, params.value(prefix + ".wk"), params.value(prefix + ".bk"));
    Tensor v = linear(kv_in, params.value(prefix + ".wv"), params.value(prefix + ".bv"));
    Tensor merged({nq, d});
    if (attn_out) *attn_out = Tensor({heads, nq, nk});
    for (int h = 0; h < heads; ++h) {
        for (int i = 0; i < nq; ++i) {
            double mx = -1e300;
            std::vector<double> s(static_cast<std::size_t>(nk));
            for (int j = 0; j < nk; ++j) {
                double sc = 0.0;
                for (int c = 0; c < dh; ++c) sc += q.at(i, h * dh + c) * k.at(j, h * dh + c);
                sc *= att_scale;
                s[static_cast<std::size_t>(j)] = sc;
                mx = std::max(mx, sc);
            }
            double denom = 0.0;
            for (int j = 0; j < nk; ++j) {
                s[static_cast<std::size_t>(j)] = std::exp(s[static_cast<std::size_t>(j)] - mx);
                denom += s[static_cast<std::size_t>(j)];
            }
            for (int j = 0; j < nk; ++j) {
                double a = s[static_cast<std::size_t>(j)] / denom;
                if (attn_out) attn_out->at(h, i, j) = a;
                for (int c = 0; c < dh; ++c) merged.at(i, h * dh + c) += a * v.at(j, h * dh + c);
            }
        }
    }
    return linear(merged, params.value(prefix + ".wo"), params.value(prefix + ".bo"));
}

Tensor mlp_block(const Tensor& x, const ParamSet& params, const std::string& prefix) {
    Tensor h = linear(x, params.value(prefix + ".w1"), params.value(prefix + ".b1"));
    return linear(gelu(h), params.value(prefix + ".w2"), params.value(prefix + ".b2"));
}

}  // namespace mov
