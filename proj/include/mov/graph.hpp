#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mov/params.hpp"
#include "mov/tensor.hpp"

namespace mov {

struct GraphNode {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> backward;
};

using Var = GraphNode*;

// Tape-based reverse-mode autodiff. Nodes are owned by the graph and stored
// in creation order, which is a valid topological order, so backward() is a
// single reverse sweep. A graph is built per training step and discarded.
class Graph {
public:
    Var leaf(Tensor value, bool requires_grad = false);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Binds a named parameter; repeated requests return the same node so
    // gradients from every use accumulate in one place.
    Var param(ParamSet& ps, const std::string& name);

    Var add(Var a, Var b);
    Var add_scaled(Var a, Var b, double s);
    Var scale(Var a, double s);
    Var matmul(Var a, Var b);     // [m,k]·[k,n]
    Var matmul_nt(Var a, Var b);  // [m,k]·[n,k]ᵀ
    Var linear(Var x, Var w, Var b);
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
    Var gelu(Var x);
    Var softmax_rows(Var x, double scale = 1.0);
    Var slice_cols(Var x, int c0, int c1);
    Var concat_cols(const std::vector<Var>& xs);
    Var slice_row(Var x, int row);  // [t,d] -> [d]
    Var mean_rows(Var x);           // [t,d] -> [d]
    Var vstack(const std::vector<Var>& xs);
    Var reshape(Var x, std::vector<int> shape);

    // out = mix · x for a fixed (non-learned) mixing matrix; carries the
    // positional-embedding interpolation.
    Var fixed_mix(const Tensor& mix, Var x);

    // Cosine similarity of a rank-1 vector against each row of a fixed
    // class-embedding matrix [C,d] -> [C].
    Var cosine_logits(Var v, const Tensor& class_embeddings);

    // -log softmax(logits/temperature)[target], scalar output.
    Var cross_entropy_temp(Var logits, int target, double temperature);

    Var sum_squares(Var x);

    // Composite multi-head attention from the primitives above. Parameter
    // nodes follow the {wq,bq,wk,bk,wv,bv,wo,bo} layout.
    Var multi_head_attention(Var query_in, Var kv_in, Var wq, Var bq, Var wk, Var bk, Var wv,
                             Var bv, Var wo, Var bo, int heads);

    void backward(Var loss);
    std::map<std::string, Tensor> trainable_grads() const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    Var make(Tensor value, const std::vector<Var>& inputs);

    std::vector<std::unique_ptr<GraphNode>> nodes_;
    std::map<std::string, Var> param_vars_;
    std::map<std::string, bool> param_trainable_;
};

}  // namespace mov
