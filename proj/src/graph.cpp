#include "mov/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mov/nn.hpp"

namespace mov {

Var Graph::leaf(Tensor value, bool requires_grad) {
    auto node = std::make_unique<GraphNode>();
    node->grad = Tensor(value.shape());
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return nodes_.back().get();
}

Var Graph::param(ParamSet& ps, const std::string& name) {
    auto it = param_vars_.find(name);
    if (it != param_vars_.end()) return it->second;
    Var v = leaf(ps.value(name), ps.trainable(name));
    param_vars_[name] = v;
    param_trainable_[name] = ps.trainable(name);
    return v;
}

Var Graph::make(Tensor value, const std::vector<Var>& inputs) {
    bool req = false;
    for (Var in : inputs) req = req || in->requires_grad;
    return leaf(std::move(value), req);
}

Var Graph::add(Var a, Var b) { return add_scaled(a, b, 1.0); }

Var Graph::add_scaled(Var a, Var b, double s) {
    if (a->value.shape() != b->value.shape()) {
        throw std::invalid_argument("add: shape mismatch");
    }
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = a->value.data()[i] + s * b->value.data()[i];
    }
    Var n = make(std::move(out), {a, b});
    if (n->requires_grad) {
        n->backward = [n, a, b, s] {
            if (a->requires_grad) {
                for (std::size_t i = 0; i < n->grad.size(); ++i) {
                    a->grad.data()[i] += n->grad.data()[i];
                }
            }
            if (b->requires_grad) {
                for (std::size_t i = 0; i < n->grad.size(); ++i) {
                    b->grad.data()[i] += s * n->grad.data()[i];
                }
            }
        };
    }
    return n;
}

Var Graph::scale(Var a, double s) {
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = s * a->value.data()[i];
    Var n = make(std::move(out), {a});
    if (n->requires_grad) {
        n->backward = [n, a, s] {
            for (std::size_t i = 0; i < n->grad.size(); ++i) {
                a->grad.data()[i] += s * n->grad.data()[i];
            }
        };
    }
    return n;
}

Var Graph::matmul(Var a, Var b) {
    Var n = make(mov::matmul(a->value, b->value), {a, b});
    if (n->requires_grad) {
        n->backward = [n, a, b] {
            if (a->requires_grad) {
                // da += g · bᵀ
                Tensor da = mov::matmul_nt(n->grad, b->value);
                for (std::size_t i = 0; i < da.size(); ++i) a->grad.data()[i] += da.data()[i];
            }
            if (b->requires_grad) {
                // db += aᵀ · g
                Tensor db = mov::matmul(transpose(a->value), n->grad);
                for (std::size_t i = 0; i < db.size(); ++i) b->grad.data()[i] += db.data()[i];
            }
        };
    }
    return n;
}

Var Graph::matmul_nt(Var a, Var b) {
    Var n = make(mov::matmul_nt(a->value, b->value), {a, b});
    if (n->requires_grad) {
        n->backward = [n, a, b] {
            if (a->requires_grad) {
                Tensor da = mov::matmul(n->grad, b->value);
                for (std::size_t i = 0; i < da.size(); ++i) a->grad.data()[i] += da.data()[i];
            }
            if (b->requires_grad) {
                Tensor db = mov::matmul(transpose(n->grad), a->value);
                for (std::size_t i = 0; i < db.size(); ++i) b->grad.data()[i] += db.data()[i];
            }
        };
    }
    return n;
}

Var Graph::linear(Var x, Var w, Var b) {
    Var n = make(mov::linear(x->value, w->value, b->value), {x, w, b});
    if (n->requires_grad) {
        n->backward = [n, x, w, b] {
            int t = n->grad.extent(0), dout = n->grad.extent(1);
            if (x->requires_grad) {
                Tensor dx = mov::matmul(n->grad, w->value);
                for (std::size_t i = 0; i < dx.size(); ++i) x->grad.data()[i] += dx.data()[i];
            }
            if (w->requires_grad) {
                Tensor dw = mov::matmul(transpose(n->grad), x->value);
                for (std::size_t i = 0; i < dw.size(); ++i) w->grad.data()[i] += dw.data()[i];
            }
            if (b->requires_grad) {
                for (int j = 0; j < dout; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < t; ++i) s += n->grad.at(i, j);
                    b->grad.at(j) += s;
                }
            }
        };
    }
    return n;
}

Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
    int d = x->value.extent(x->value.rank() - 1);
    std::size_t rows = x->value.size() / static_cast<std::size_t>(d);
    Tensor xhat(x->value.shape());
    Tensor inv_std({static_cast<int>(rows)});
    Tensor out(x->value.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x->value.data() + r * static_cast<std::size_t>(d);
        double mean = 0.0;
        for (int i = 0; i < d; ++i) mean += xr[i];
        mean /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) {
            double c = xr[i] - mean;
            var += c * c;
        }
        var /= d;
        double inv = 1.0 / std::sqrt(var + eps);
        inv_std.at(static_cast<int>(r)) = inv;
        for (int i = 0; i < d; ++i) {
            double xh = (xr[i] - mean) * inv;
            xhat.data()[r * static_cast<std::size_t>(d) + i] = xh;
            out.data()[r * static_cast<std::size_t>(d) + i] =
                xh * gain->value.at(i) + bias->value.at(i);
        }
    }
    Var n = make(std::move(out), {x, gain, bias});
    if (n->requires_grad) {
        n->backward = [n, x, gain, bias, d, rows, xhat = std::move(xhat),
                       inv_std = std::move(inv_std)] {
            for (std::size_t r = 0; r < rows; ++r) {
                const double* g = n->grad.data() + r * static_cast<std::size_t>(d);
                const double* xh = xhat.data() + r * static_cast<std::size_t>(d);
                if (gain->requires_grad) {
                    for (int i = 0; i < d; ++i) gain->grad.at(i) += g[i] * xh[i];
                }
                if (bias->requires_grad) {
                    for (int i = 0; i < d; ++i) bias->grad.at(i) += g[i];
                }
                if (x->requires_grad) {
                    double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                    for (int i = 0; i < d; ++i) {
                        double dxh = g[i] * gain->value.at(i);
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[i];
                    }
                    mean_dxh /= d;
                    mean_dxh_xh /= d;
                    double inv = inv_std.at(static_cast<int>(r));
                    double* dx = x->grad.data() + r * static_cast<std::size_t>(d);
                    for (int i = 0; i < d; ++i) {
                        double dxh = g[i] * gain->value.at(i);
                        dx[i] += inv * (dxh - mean_dxh - xh[i] * mean_dxh_xh);
                    }
                }
            }
        };
    }
    return n;
}

Var Graph::gelu(Var x) {
    Var n = make(mov::gelu(x->value), {x});
    if (n->requires_grad) {
        n->backward = [n, x] {
            constexpr double k = 0.7978845608028654;
            for (std::size_t i = 0; i < x->value.size(); ++i) {
                double v = x->value.data()[i];
                double u = k * (v + 0.044715 * v * v * v);
                double t = std::tanh(u);
                double du = k * (1.0 + 3.0 * 0.044715 * v * v);
                double deriv = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                x->grad.data()[i] += deriv * n->grad.data()[i];
            }
        };
    }
    return n;
}

Var Graph::softmax_rows(Var x, double scale) {
    if (x->value.rank() != 2) throw std::invalid_argument("softmax_rows expects rank 2");
    int t = x->value.extent(0), c = x->value.extent(1);
    Tensor out({t, c});
    for (int r = 0; r < t; ++r) {
        double mx = x->value.at(r, 0) * scale;
        for (int j = 1; j < c; ++j) mx = std::max(mx, x->value.at(r, j) * scale);
        double denom = 0.0;
        for (int j = 0; j < c; ++j) {
            double e = std::exp(x->value.at(r, j) * scale - mx);
            out.at(r, j) = e;
            denom += e;
        }
        for (int j = 0; j < c; ++j) out.at(r, j) /= denom;
    }
    Var n = make(std::move(out), {x});
    if (n->requires_grad) {
        n->backward = [n, x, t, c, scale] {
            for (int r = 0; r < t; ++r) {
                double dotgp = 0.0;
                for (int j = 0; j < c; ++j) dotgp += n->grad.at(r, j) * n->value.at(r, j);
                for (int j = 0; j < c; ++j) {
                    x->grad.at(r, j) +=
                        scale * n->value.at(r, j) * (n->grad.at(r, j) - dotgp);
                }
            }
        };
    }
    return n;
}

Var Graph::slice_cols(Var x, int c0, int c1) {
    if (x->value.rank() != 2 || c0 < 0 || c1 <= c0 || c1 > x->value.extent(1)) {
        throw std::invalid_argument("slice_cols out of range");
    }
    int t = x->value.extent(0), w = c1 - c0;
    Tensor out({t, w});
    for (int r = 0; r < t; ++r)
        for (int j = 0; j < w; ++j) out.at(r, j) = x->value.at(r, c0 + j);
    Var n = make(std::move(out), {x});
    if (n->requires_grad) {
        n->backward = [n, x, c0, t, w] {
            for (int r = 0; r < t; ++r)
                for (int j = 0; j < w; ++j) x->grad.at(r, c0 + j) += n->grad.at(r, j);
        };
    }
    return n;
}

Var Graph::concat_cols(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_cols of nothing");
    int t = xs[0]->value.extent(0), total = 0;
    for (Var v : xs) {
        if (v->value.rank() != 2 || v->value.extent(0) != t) {
            throw std::invalid_argument("concat_cols row mismatch");
        }
        total += v->value.extent(1);
    }
    Tensor out({t, total});
    int off = 0;
    for (Var v : xs) {
        int w = v->value.extent(1);
        for (int r = 0; r < t; ++r)
            for (int j = 0; j < w; ++j) out.at(r, off + j) = v->value.at(r, j);
        off += w;
    }
    Var n = make(std::move(out), xs);
    if (n->requires_grad) {
        n->backward = [n, xs, t] {
            int off = 0;
            for (Var v : xs) {
                int w = v->value.extent(1);
                if (v->requires_grad) {
                    for (int r = 0; r < t; ++r)
                        for (int j = 0; j < w; ++j) v->grad.at(r, j) += n->grad.at(r, off + j);
                }
                off += w;
            }
        };
    }
    return n;
}

Var Graph::slice_row(Var x, int row) {
    if (x->value.rank() != 2 || row < 0 || row >= x->value.extent(0)) {
        throw std::invalid_argument("slice_row out of range");
    }
    int d = x->value.extent(1);
    Tensor out({d});
    for (int j = 0; j < d; ++j) out.at(j) = x->value.at(row, j);
    Var n = make(std::move(out), {x});
    if (n->requires_grad) {
        n->backward = [n, x, row, d] {
            for (int j = 0; j < d; ++j) x->grad.at(row, j) += n->grad.at(j);
        };
    }
    return n;
}

Var Graph::mean_rows(Var x) {
    if (x->value.rank() != 2) throw std::invalid_argument("mean_rows expects rank 2");
    int t = x->value.extent(0), d = x->value.extent(1);
    Tensor out({d});
    for (int r = 0; r < t; ++r)
        for (int j = 0; j < d; ++j) out.at(j) += x->value.at(r, j);
    for (int j = 0; j < d; ++j) out.at(j) /= t;
    Var n = make(std::move(out), {x});
    if (n->requires_grad) {
        n->backward = [n, x, t, d] {
            for (int r = 0; r < t; ++r)
                for (int j = 0; j < d; ++j) x->grad.at(r, j) += n->grad.at(j) / t;
        };
    }
    return n;
}

Var Graph::vstack(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("vstack of nothing");
    int d = xs[0]->value.extent(xs[0]->value.rank() - 1), rows = 0;
    for (Var v : xs) {
        if (v->value.rank() != 2 || v->value.extent(1) != d) {
            throw std::invalid_argument("vstack column mismatch");
        }
        rows += v->value.extent(0);
    }
    Tensor out({rows, d});
    int off = 0;
    for (Var v : xs) {
        for (int r = 0; r < v->value.extent(0); ++r)
            for (int j = 0; j < d; ++j) out.at(off + r, j) = v->value.at(r, j);
        off += v->value.extent(0);
    }
    Var n = make(std::move(out), xs);
    if (n->requires_grad) {
        n->backward = [n, xs, d] {
            int off = 0;
            for (Var v : xs) {
                if (v->requires_grad) {
                    for (int r = 0; r < v->value.extent(0); ++r)
                        for (int j = 0; j < d; ++j) v->grad.at(r, j) += n->grad.at(off + r, j);
                }
                off += v->value.extent(0);
            }
        };
    }
    return n;
}

Var Graph::reshape(Var x, std::vector<int> shape) {
    Var n = make(x->value.reshaped(shape), {x});
    if (n->requires_grad) {
        n->backward = [n, x] {
            for (std::size_t i = 0; i < x->grad.size(); ++i) {
                x->grad.data()[i] += n->grad.data()[i];
            }
        };
    }
    return n;
}

Var Graph::fixed_mix(const Tensor& mix, Var x) {
    if (mix.rank() != 2 || x->value.rank() != 2 || mix.extent(1) != x->value.extent(0)) {
        throw std::invalid_argument("fixed_mix shape mismatch");
    }
    Var n = make(mov::matmul(mix, x->value), {x});
    if (n->requires_grad) {
        n->backward = [n, x, mix] {
            Tensor dx = mov::matmul(transpose(mix), n->grad);
            for (std::size_t i = 0; i < dx.size(); ++i) x->grad.data()[i] += dx.data()[i];
        };
    }
    return n;
}

Var Graph::cosine_logits(Var v, const Tensor& class_embeddings) {
    if (v->value.rank() != 1 || class_embeddings.rank() != 2 ||
        class_embeddings.extent(1) != v->value.extent(0)) {
        throw std::invalid_argument("cosine_logits shape mismatch");
    }
    int c = class_embeddings.extent(0), d = v->value.extent(0);
    double nv = l2_norm(v->value);
    if (nv <= 0.0) throw std::invalid_argument("cosine_logits: zero query vector");
    Tensor out({c});
    std::vector<double> enorm(static_cast<std::size_t>(c));
    for (int j = 0; j < c; ++j) {
        double ne = 0.0, dp = 0.0;
        for (int i = 0; i < d; ++i) {
            ne += class_embeddings.at(j, i) * class_embeddings.at(j, i);
            dp += class_embeddings.at(j, i) * v->value.at(i);
        }
        ne = std::sqrt(ne);
        if (ne <= 0.0) throw std::invalid_argument("cosine_logits: zero class embedding");
        enorm[static_cast<std::size_t>(j)] = ne;
        out.at(j) = dp / (nv * ne);
    }
    Var n = make(std::move(out), {v});
    if (n->requires_grad) {
        n->backward = [n, v, class_embeddings, c, d, nv, enorm = std::move(enorm)] {
            // d sim_j / dv = (e_j/|e_j| - sim_j · v/|v|) / |v|
            for (int j = 0; j < c; ++j) {
                double g = n->grad.at(j);
                if (g == 0.0) continue;
                double sim = n->value.at(j);
                for (int i = 0; i < d; ++i) {
                    double unit_e = class_embeddings.at(j, i) / enorm[static_cast<std::size_t>(j)];
                    double unit_v = v->value.at(i) / nv;
                    v->grad.at(i) += g * (unit_e - sim * unit_v) / nv;
                }
            }
        };
    }
    return n;
}

Var Graph::cross_entropy_temp(Var logits, int target, double temperature) {
    if (logits->value.rank() != 1) throw std::invalid_argument("cross_entropy expects rank 1");
    int c = logits->value.extent(0);
    if (target < 0 || target >= c) throw std::invalid_argument("cross_entropy target out of range");
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
    double mx = logits->value.at(0) / temperature;
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits->value.at(j) / temperature);
    double denom = 0.0;
    std::vector<double> p(static_cast<std::size_t>(c));
    for (int j = 0; j < c; ++j) {
        p[static_cast<std::size_t>(j)] = std::exp(logits->value.at(j) / temperature - mx);
        denom += p[static_cast<std::size_t>(j)];
    }
    for (int j = 0; j < c; ++j) p[static_cast<std::size_t>(j)] /= denom;
    Tensor out({1});
    out.at(0) = -std::log(std::max(p[static_cast<std::size_t>(target)], 1e-300));
    Var n = make(std::move(out), {logits});
    if (n->requires_grad) {
        n->backward = [n, logits, target, temperature, c, p = std::move(p)] {
            double g = n->grad.at(0);
            for (int j = 0; j < c; ++j) {
                double ind = (j == target) ? 1.0 : 0.0;
                logits->grad.at(j) += g * (p[static_cast<std::size_t>(j)] - ind) / temperature;
            }
        };
    }
    return n;
}

Var Graph::sum_squares(Var x) {
    Tensor out({1});
    for (std::size_t i = 0; i < x->value.size(); ++i) {
        out.at(0) += x->value.data()[i] * x->value.data()[i];
    }
    Var n = make(std::move(out), {x});
    if (n->requires_grad) {
        n->backward = [n, x] {
            double g = n->grad.at(0);
            for (std::size_t i = 0; i < x->value.size(); ++i) {
                x->grad.data()[i] += 2.0 * x->value.data()[i] * g;
            }
        };
    }
    return n;
}

Var Graph::multi_head_attention(Var query_in, Var kv_in, Var wq, Var bq, Var wk, Var bk, Var wv,
                                Var bv, Var wo, Var bo, int heads) {
    int d = query_in->value.extent(1);
    if (heads <= 0 || d % heads != 0) {
        throw std::invalid_argument("attention width must be divisible by head count");
    }
    int dh = d / heads;
    double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Var q = linear(query_in, wq, bq);
    Var k = linear(kv_in, wk, bk);
    Var v = linear(kv_in, wv, bv);
    std::vector<Var> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var qh = slice_cols(q, h * dh, (h + 1) * dh);
        Var kh = slice_cols(k, h * dh, (h + 1) * dh);
        Var vh = slice_cols(v, h * dh, (h + 1) * dh);
        Var scores = matmul_nt(qh, kh);
        Var attn = softmax_rows(scores, att_scale);
        head_outs.push_back(matmul(attn, vh));
    }
    Var merged = concat_cols(head_outs);
    return linear(merged, wo, bo);
}

void Graph::backward(Var loss) {
    if (loss->value.size() != 1) {
        throw std::invalid_argument("backward requires a scalar loss");
    }
    if (!loss->requires_grad) {
        throw std::invalid_argument("loss does not depend on any trainable input");
    }
    loss->grad.data()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        GraphNode* node = it->get();
        if (node->requires_grad && node->backward) node->backward();
    }
}

std::map<std::string, Tensor> Graph::trainable_grads() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, var] : param_vars_) {
        if (param_trainable_.at(name)) out[name] = var->grad;
    }
    return out;
}

}  // namespace mov
