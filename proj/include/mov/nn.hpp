#pragma once

#include <string>
#include <vector>

#include "mov/params.hpp"
#include "mov/tensor.hpp"

namespace mov {

// Rank-1 tensor with entries in [0,1] summing to 1 (checked on construction).
class ProbabilityVector {
public:
    explicit ProbabilityVector(Tensor values);

    const Tensor& values() const { return values_; }
    int size() const { return values_.extent(0); }
    double operator[](int i) const { return values_.at(i); }
    int argmax() const;

private:
    Tensor values_;
};

ProbabilityVector softmax(const Tensor& logits, double temperature);

// Normalizes the last axis of x; gain/bias have that axis's length.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon = 1e-5);

double gelu(double x);
Tensor gelu(const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]·[k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]·[n,k]ᵀ -> [m,n]
Tensor transpose(const Tensor& a);

// x: [t, d_in], w: [d_out, d_in], b: [d_out] -> [t, d_out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);
Tensor l2_normalized(const Tensor& a);
double cosine_similarity(const Tensor& a, const Tensor& b);

double half_cosine_lr(double base_lr, long step, long total_steps);

double entropy(const ProbabilityVector& p);

// Forward-only multi-head attention reading {wq,bq,wk,bk,wv,bv,wo,bo} under
// prefix. Self-attention when query_in and kv_in are the same tensor. When
// attn_out is given it receives the attention weights [heads, n_q, n_kv].
Tensor multi_head_attention(const Tensor& query_in, const Tensor& kv_in,
                            const ParamSet& params, const std::string& prefix, int heads,
                            Tensor* attn_out = nullptr);

// Forward-only two-layer MLP with GELU, reading {w1,b1,w2,b2} under prefix.
Tensor mlp_block(const Tensor& x, const ParamSet& params, const std::string& prefix);

}  // namespace mov
