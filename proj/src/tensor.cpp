// ----------------------------------------------------------------------------
// Copyright 2026 The tdaec Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ----------------------------------------------------------------------------

#include "tdaec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace tdaec {

namespace {

thread_local bool g_grad_enabled = true;

void require(bool cond, const std::string& what) {
    if (!cond) throw ShapeError(what);
}

void require_rank2(const Tensor& t, const char* op) {
    require(t.defined() && t.rank() == 2,
            std::string(op) + ": expected a rank-2 tensor, got " +
                (t.defined() ? shape_str(t.shape()) : std::string("undefined")));
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ']';
    return os.str();
}

std::vector<double>& detail::Node::grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    require(shape_numel(shape) == values.size(),
            "Tensor::from: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t i) const {
    require(i < rank(), "Tensor::dim: axis out of range");
    return node_->shape[i];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
    require(numel() == 1, "Tensor::item: tensor has " + std::to_string(numel()) + " elements");
    return node_->value[0];
}

double Tensor::operator()(std::size_t r, std::size_t c) const {
    return node_->value[r * node_->shape[1] + c];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    if (!node_->is_leaf) throw std::logic_error("set_requires_grad on a non-leaf tensor");
    node_->requires_grad = on;
}

bool Tensor::is_leaf() const { return node_->is_leaf; }

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

// ---------------------------------------------------------------------------
// Graph

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Tensor make_op_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                      std::function<void(detail::Node&)> backward_fn) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->is_leaf = false;
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.defined() && t.requires_grad(); });
    if (g_grad_enabled && any) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (auto& t : inputs) node->parents.push_back(t.defined() ? t.node_ptr() : nullptr);
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ShapeError("backward: loss must be a scalar tensor");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].get();
            if (parent && parent->requires_grad && seen.insert(parent).second)
                stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* node : order)
        if (!node->is_leaf) node->grad.assign(node->value.size(), 0.0);
    loss.node()->grad_buffer()[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (!node->is_leaf && node->backward) node->backward(*node);
    }
}

namespace {

// Gradient buffer of parent i if it takes part in differentiation.
std::vector<double>* parent_grad(detail::Node& self, std::size_t i) {
    auto& p = self.parents[i];
    if (!p || !p->requires_grad) return nullptr;
    return &p->grad_buffer();
}

const std::vector<double>& parent_value(detail::Node& self, std::size_t i) {
    return self.parents[i]->value;
}

} // namespace

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_op_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        for (std::size_t k = 0; k < 2; ++k)
            if (auto* g = parent_grad(self, k))
                for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_op_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        if (auto* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        if (auto* g = parent_grad(self, 1))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_op_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        const auto& av = parent_value(self, 0);
        const auto& bv = parent_value(self, 1);
        if (auto* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
        if (auto* g = parent_grad(self, 1))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
    return make_op_result(a.shape(), std::move(out), {a}, [factor](detail::Node& self) {
        if (auto* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_op_result({1}, {s}, {a}, [](detail::Node& self) {
        if (auto* g = parent_grad(self, 0))
            for (auto& v : *g) v += self.grad[0];
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    return make_op_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
        const auto& xv = parent_value(self, 0);
        if (auto* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i)
                if (xv[i] > 0.0) (*g)[i] += self.grad[i];
    });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x.data()[i]);
    return make_op_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
        if (auto* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) {
                const double s = self.value[i];
                (*g)[i] += self.grad[i] * s * (1.0 - s);
            }
    });
}

Tensor tanh(const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.data()[i]);
    return make_op_result(x.shape(), std::move(out), {x}, [](detail::Node& self) {
        if (auto* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) {
                const double t = self.value[i];
                (*g)[i] += self.grad[i] * (1.0 - t * t);
            }
    });
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
    require(slope.numel() == 1, "prelu: slope must have one element");
    const double a = slope.item();
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x.data()[i];
        out[i] = v < 0.0 ? a * v : v;
    }
    return make_op_result(x.shape(), std::move(out), {x, slope}, [](detail::Node& self) {
        const auto& xv = parent_value(self, 0);
        const double a = parent_value(self, 1)[0];
        if (auto* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * (xv[i] < 0.0 ? a : 1.0);
        if (auto* g = parent_grad(self, 1)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < xv.size(); ++i)
                if (xv[i] < 0.0) acc += self.grad[i] * xv[i];
            (*g)[0] += acc;
        }
    });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    require(b.dim(0) == k, "matmul: inner dimension mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> out(m * n, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            double* row = &out[i * n];
            const double* brow = B + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
        }
    return make_op_result({m, n}, std::move(out), {a, b}, [m, k, n](detail::Node& self) {
        const double* A = parent_value(self, 0).data();
        const double* B = parent_value(self, 1).data();
        const double* G = self.grad.data();
        if (auto* g = parent_grad(self, 0)) { // dA = G B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
                    (*g)[i * k + p] += acc;
                }
        }
        if (auto* g = parent_grad(self, 1)) { // dB = A^T G
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = A[i * k + p];
                    if (aip == 0.0) continue;
                    double* row = g->data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) row[j] += aip * G[i * n + j];
                }
        }
    });
}

Tensor pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& bias) {
    require_rank2(x, "pointwise_conv");
    require_rank2(w, "pointwise_conv");
    const std::size_t T = x.dim(0), in = x.dim(1), out_ch = w.dim(0);
    require(w.dim(1) == in, "pointwise_conv: weight " + shape_str(w.shape()) + " does not match input " + shape_str(x.shape()));
    const bool has_bias = bias.defined();
    if (has_bias) require(bias.numel() == out_ch, "pointwise_conv: bias size mismatch");
    std::vector<double> out(T * out_ch);
    const double* X = x.data().data();
    const double* W = w.data().data();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t o = 0; o < out_ch; ++o) {
            double acc = has_bias ? bias.data()[o] : 0.0;
            const double* xr = X + t * in;
            const double* wr = W + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
            out[t * out_ch + o] = acc;
        }
    std::vector<Tensor> inputs{x, w};
    if (has_bias) inputs.push_back(bias);
    return make_op_result({T, out_ch}, std::move(out), std::move(inputs), [T, in, out_ch, has_bias](detail::Node& self) {
        const double* X = parent_value(self, 0).data();
        const double* W = parent_value(self, 1).data();
        const double* G = self.grad.data();
        if (auto* g = parent_grad(self, 0)) { // dX = G W
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t o = 0; o < out_ch; ++o) {
                    const double go = G[t * out_ch + o];
                    if (go == 0.0) continue;
                    double* dx = g->data() + t * in;
                    const double* wr = W + o * in;
                    for (std::size_t i = 0; i < in; ++i) dx[i] += go * wr[i];
                }
        }
        if (auto* g = parent_grad(self, 1)) { // dW = G^T X
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t o = 0; o < out_ch; ++o) {
                    const double go = G[t * out_ch + o];
                    if (go == 0.0) continue;
                    double* dw = g->data() + o * in;
                    const double* xr = X + t * in;
                    for (std::size_t i = 0; i < in; ++i) dw[i] += go * xr[i];
                }
        }
        if (has_bias)
            if (auto* g = parent_grad(self, 2))
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t o = 0; o < out_ch; ++o) (*g)[o] += G[t * out_ch + o];
    });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_channels: no inputs");
    for (const auto& p : parts) require_rank2(p, "concat_channels");
    const std::size_t T = parts.front().dim(0);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.dim(0) == T, "concat_channels: frame count mismatch");
        widths.push_back(p.dim(1));
        total += p.dim(1);
    }
    std::vector<double> out(T * total);
    for (std::size_t t = 0; t < T; ++t) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const double* src = parts[k].data().data() + t * widths[k];
            std::copy(src, src + widths[k], out.begin() + static_cast<std::ptrdiff_t>(t * total + off));
            off += widths[k];
        }
    }
    return make_op_result({T, total}, std::move(out), parts, [T, total, widths](detail::Node& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            if (auto* g = parent_grad(self, k))
                for (std::size_t t = 0; t < T; ++t)
                    for (std::size_t c = 0; c < widths[k]; ++c)
                        (*g)[t * widths[k] + c] += self.grad[t * total + off + c];
            off += widths[k];
        }
    });
}

Tensor softmax_rows(const Tensor& x) {
    require_rank2(x, "softmax_rows");
    const std::size_t T = x.dim(0), C = x.dim(1);
    std::vector<double> out(T * C);
    for (std::size_t t = 0; t < T; ++t) {
        const double* row = x.data().data() + t * C;
        const double mx = *std::max_element(row, row + C);
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += (out[t * C + c] = std::exp(row[c] - mx));
        for (std::size_t c = 0; c < C; ++c) out[t * C + c] /= z;
    }
    return make_op_result(x.shape(), std::move(out), {x}, [T, C](detail::Node& self) {
        if (auto* g = parent_grad(self, 0))
            for (std::size_t t = 0; t < T; ++t) {
                const double* p = self.value.data() + t * C;
                const double* gy = self.grad.data() + t * C;
                double dot = 0.0;
                for (std::size_t c = 0; c < C; ++c) dot += p[c] * gy[c];
                for (std::size_t c = 0; c < C; ++c) (*g)[t * C + c] += p[c] * (gy[c] - dot);
            }
    });
}

// ---------------------------------------------------------------------------
// Sequence ops

Tensor layer_norm_cumulative(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    require_rank2(x, "layer_norm_cumulative");
    const std::size_t T = x.dim(0), C = x.dim(1);
    require(gain.numel() == C && bias.numel() == C, "layer_norm_cumulative: gain/bias size mismatch");

    std::vector<double> normed(T * C), mean(T), sigma(T);
    std::vector<char> floored(T);
    std::vector<double> out(T * C);
    double s1 = 0.0, s2 = 0.0;
    const double* X = x.data().data();
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t c = 0; c < C; ++c) {
            s1 += X[t * C + c];
            s2 += X[t * C + c] * X[t * C + c];
        }
        const double n = static_cast<double>((t + 1) * C);
        const double mu = s1 / n;
        double var = s2 / n - mu * mu;
        floored[t] = var < kClnVarianceFloor;
        if (floored[t]) var = kClnVarianceFloor;
        mean[t] = mu;
        sigma[t] = std::sqrt(var);
        for (std::size_t c = 0; c < C; ++c) {
            const double xn = (X[t * C + c] - mu) / sigma[t];
            normed[t * C + c] = xn;
            out[t * C + c] = xn * gain.data()[c] + bias.data()[c];
        }
    }
    return make_op_result(x.shape(), std::move(out), {x, gain, bias},
                          [T, C, normed = std::move(normed), mean = std::move(mean),
                           sigma = std::move(sigma), floored = std::move(floored)](detail::Node& self) {
        const double* X = parent_value(self, 0).data();
        const double* gam = parent_value(self, 1).data();
        const double* G = self.grad.data();
        if (auto* g = parent_grad(self, 1))
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t c = 0; c < C; ++c) (*g)[c] += G[t * C + c] * normed[t * C + c];
        if (auto* g = parent_grad(self, 2))
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t c = 0; c < C; ++c) (*g)[c] += G[t * C + c];
        auto* gx = parent_grad(self, 0);
        if (!gx) return;

        // Per-frame adjoints of the running sums S1 (sum x) and S2 (sum x^2);
        // every x at frame tau feeds the sums of all frames t >= tau.
        std::vector<double> g_s1(T), g_s2(T);
        for (std::size_t t = 0; t < T; ++t) {
            const double n = static_cast<double>((t + 1) * C);
            double g_mu = 0.0, g_sigma = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const double gh = G[t * C + c] * gam[c];
                (*gx)[t * C + c] += gh / sigma[t];
                g_mu -= gh / sigma[t];
                g_sigma -= gh * normed[t * C + c] / sigma[t];
            }
            const double g_var = floored[t] ? 0.0 : g_sigma / (2.0 * sigma[t]);
            g_s1[t] = g_mu / n - 2.0 * mean[t] * g_var / n;
            g_s2[t] = g_var / n;
        }
        double a = 0.0, b = 0.0;
        for (std::size_t t = T; t-- > 0;) {
            a += g_s1[t];
            b += g_s2[t];
            for (std::size_t c = 0; c < C; ++c) (*gx)[t * C + c] += a + 2.0 * X[t * C + c] * b;
        }
    });
}

Tensor lstm_layer(const Tensor& x, const LstmWeights& weights) {
    require_rank2(x, "lstm_layer");
    require_rank2(weights.w_ih, "lstm_layer");
    require_rank2(weights.w_hh, "lstm_layer");
    const std::size_t T = x.dim(0), in = x.dim(1);
    const std::size_t H = weights.w_hh.dim(1), G4 = 4 * H;
    require(weights.w_hh.dim(0) == G4, "lstm_layer: w_hh must be [4H, H]");
    require(weights.w_ih.dim(0) == G4 && weights.w_ih.dim(1) == in,
            "lstm_layer: w_ih " + shape_str(weights.w_ih.shape()) + " does not match input " + shape_str(x.shape()));
    require(weights.bias.numel() == G4, "lstm_layer: bias must have 4H elements");

    const double* X = x.data().data();
    const double* Wih = weights.w_ih.data().data();
    const double* Whh = weights.w_hh.data().data();
    const double* bias = weights.bias.data().data();

    std::vector<double> gates(T * G4), cell(T * H), tanh_cell(T * H), h(T * H);
    std::vector<double> z(G4);
    for (std::size_t t = 0; t < T; ++t) {
        const double* xt = X + t * in;
        const double* hprev = t ? &h[(t - 1) * H] : nullptr;
        for (std::size_t r = 0; r < G4; ++r) {
            double acc = bias[r];
            const double* wr = Wih + r * in;
            for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xt[i];
            if (hprev) {
                const double* ur = Whh + r * H;
                for (std::size_t j = 0; j < H; ++j) acc += ur[j] * hprev[j];
            }
            z[r] = acc;
        }
        double* gt = &gates[t * G4];
        for (std::size_t j = 0; j < H; ++j) {
            const double ig = sigmoid_scalar(z[j]);
            const double fg = sigmoid_scalar(z[H + j]);
            const double gg = std::tanh(z[2 * H + j]);
            const double og = sigmoid_scalar(z[3 * H + j]);
            gt[j] = ig;
            gt[H + j] = fg;
            gt[2 * H + j] = gg;
            gt[3 * H + j] = og;
            const double cprev = t ? cell[(t - 1) * H + j] : 0.0;
            const double c = fg * cprev + ig * gg;
            cell[t * H + j] = c;
            tanh_cell[t * H + j] = std::tanh(c);
            h[t * H + j] = og * tanh_cell[t * H + j];
        }
    }
    std::vector<double> out = h;
    return make_op_result({T, H}, std::move(out), {x, weights.w_ih, weights.w_hh, weights.bias},
                          [T, in, H, G4, gates = std::move(gates), cell = std::move(cell),
                           tanh_cell = std::move(tanh_cell)](detail::Node& self) {
        const double* X = parent_value(self, 0).data();
        const double* Wih = parent_value(self, 1).data();
        const double* Whh = parent_value(self, 2).data();
        const double* hs = self.value.data();
        const double* G = self.grad.data();

        std::vector<double> dz(T * G4);
        std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
        for (std::size_t t = T; t-- > 0;) {
            const double* gt = &gates[t * G4];
            double* dzt = &dz[t * G4];
            for (std::size_t j = 0; j < H; ++j) {
                const double dh = G[t * H + j] + dh_next[j];
                const double ig = gt[j], fg = gt[H + j], gg = gt[2 * H + j], og = gt[3 * H + j];
                const double tc = tanh_cell[t * H + j];
                const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
                const double cprev = t ? cell[(t - 1) * H + j] : 0.0;
                dzt[j] = dc * gg * ig * (1.0 - ig);
                dzt[H + j] = dc * cprev * fg * (1.0 - fg);
                dzt[2 * H + j] = dc * ig * (1.0 - gg * gg);
                dzt[3 * H + j] = dh * tc * og * (1.0 - og);
                dc_next[j] = dc * fg;
            }
            std::fill(dh_next.begin(), dh_next.end(), 0.0);
            for (std::size_t r = 0; r < G4; ++r) {
                const double d = dzt[r];
                if (d == 0.0) continue;
                const double* ur = Whh + r * H;
                for (std::size_t j = 0; j < H; ++j) dh_next[j] += d * ur[j];
            }
        }

        if (auto* g = parent_grad(self, 0))
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t r = 0; r < G4; ++r) {
                    const double d = dz[t * G4 + r];
                    if (d == 0.0) continue;
                    const double* wr = Wih + r * in;
                    double* gx = g->data() + t * in;
                    for (std::size_t i = 0; i < in; ++i) gx[i] += d * wr[i];
                }
        if (auto* g = parent_grad(self, 1))
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t r = 0; r < G4; ++r) {
                    const double d = dz[t * G4 + r];
                    if (d == 0.0) continue;
                    const double* xt = X + t * in;
                    double* gw = g->data() + r * in;
                    for (std::size_t i = 0; i < in; ++i) gw[i] += d * xt[i];
                }
        if (auto* g = parent_grad(self, 2))
            for (std::size_t t = 1; t < T; ++t)
                for (std::size_t r = 0; r < G4; ++r) {
                    const double d = dz[t * G4 + r];
                    if (d == 0.0) continue;
                    const double* hp = hs + (t - 1) * H;
                    double* gu = g->data() + r * H;
                    for (std::size_t j = 0; j < H; ++j) gu[j] += d * hp[j];
                }
        if (auto* g = parent_grad(self, 3))
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t r = 0; r < G4; ++r) (*g)[r] += dz[t * G4 + r];
    });
}

Tensor local_attention(const Tensor& q, const Tensor& kv, std::size_t window) {
    require_rank2(q, "local_attention");
    require_rank2(kv, "local_attention");
    require(q.shape() == kv.shape(), "local_attention: query/key shape mismatch " + shape_str(q.shape()) + " vs " + shape_str(kv.shape()));
    require(window >= 1, "local_attention: window must be >= 1");
    const std::size_t T = q.dim(0), D = q.dim(1);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
    const double* Q = q.data().data();
    const double* K = kv.data().data();

    // weights[t * window + (j - lo)] for j in lo..t
    std::vector<double> weights(T * window, 0.0);
    std::vector<double> out(T * D, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
        double* w = &weights[t * window];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = lo; j <= t; ++j) {
            double s = 0.0;
            for (std::size_t d = 0; d < D; ++d) s += Q[t * D + d] * K[j * D + d];
            w[j - lo] = s * inv_sqrt_d;
            mx = std::max(mx, w[j - lo]);
        }
        double z = 0.0;
        for (std::size_t j = lo; j <= t; ++j) z += (w[j - lo] = std::exp(w[j - lo] - mx));
        for (std::size_t j = lo; j <= t; ++j) {
            w[j - lo] /= z;
            for (std::size_t d = 0; d < D; ++d) out[t * D + d] += w[j - lo] * K[j * D + d];
        }
    }
    return make_op_result({T, D}, std::move(out), {q, kv},
                          [T, D, window, inv_sqrt_d, weights = std::move(weights)](detail::Node& self) {
        const double* Q = parent_value(self, 0).data();
        const double* K = parent_value(self, 1).data();
        const double* G = self.grad.data();
        auto* gq = parent_grad(self, 0);
        auto* gkv = parent_grad(self, 1);
        std::vector<double> ga(window), gs(window);
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
            const double* w = &weights[t * window];
            const double* go = G + t * D;
            double dot = 0.0;
            for (std::size_t j = lo; j <= t; ++j) {
                double acc = 0.0;
                for (std::size_t d = 0; d < D; ++d) acc += go[d] * K[j * D + d];
                ga[j - lo] = acc;
                dot += w[j - lo] * acc;
            }
            for (std::size_t j = lo; j <= t; ++j) gs[j - lo] = w[j - lo] * (ga[j - lo] - dot) * inv_sqrt_d;
            for (std::size_t j = lo; j <= t; ++j) {
                if (gkv)
                    for (std::size_t d = 0; d < D; ++d)
                        (*gkv)[j * D + d] += w[j - lo] * go[d] + gs[j - lo] * Q[t * D + d];
                if (gq)
                    for (std::size_t d = 0; d < D; ++d) (*gq)[t * D + d] += gs[j - lo] * K[j * D + d];
            }
        }
    });
}

Tensor frame_signal(const Tensor& x, std::size_t frame_len, std::size_t hop) {
    require(x.defined() && x.rank() == 1, "frame_signal: expected a rank-1 signal");
    require(frame_len >= 1 && hop >= 1, "frame_signal: frame length and hop must be positive");
    const std::size_t len = x.numel();
    if (len < frame_len)
        throw ShapeError("frame_signal: signal of " + std::to_string(len) + " samples is shorter than frame length " +
                         std::to_string(frame_len));
    const std::size_t T = (len - frame_len) / hop + 1;
    std::vector<double> out(T * frame_len);
    for (std::size_t k = 0; k < T; ++k)
        std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(k * hop), frame_len,
                    out.begin() + static_cast<std::ptrdiff_t>(k * frame_len));
    return make_op_result({T, frame_len}, std::move(out), {x}, [T, frame_len, hop](detail::Node& self) {
        if (auto* g = parent_grad(self, 0))
            for (std::size_t k = 0; k < T; ++k)
                for (std::size_t i = 0; i < frame_len; ++i) (*g)[k * hop + i] += self.grad[k * frame_len + i];
    });
}

Tensor overlap_add(const Tensor& frames, std::size_t hop, bool normalize, std::size_t out_len) {
    require_rank2(frames, "overlap_add");
    require(hop >= 1, "overlap_add: hop must be positive");
    const std::size_t T = frames.dim(0), L = frames.dim(1);
    const std::size_t natural = T == 0 ? 0 : L + (T - 1) * hop;
    const std::size_t len = out_len ? out_len : natural;

    std::vector<double> inv_count(len, 1.0);
    if (normalize) {
        std::vector<std::size_t> count(len, 0);
        for (std::size_t k = 0; k < T; ++k)
            for (std::size_t i = 0; i < L && k * hop + i < len; ++i) ++count[k * hop + i];
        for (std::size_t n = 0; n < len; ++n) inv_count[n] = count[n] ? 1.0 / static_cast<double>(count[n]) : 0.0;
    }
    std::vector<double> out(len, 0.0);
    const double* F = frames.data().data();
    for (std::size_t k = 0; k < T; ++k)
        for (std::size_t i = 0; i < L && k * hop + i < len; ++i) out[k * hop + i] += F[k * L + i];
    for (std::size_t n = 0; n < len; ++n) out[n] *= inv_count[n];

    return make_op_result({len}, std::move(out), {frames},
                          [T, L, hop, len, inv_count = std::move(inv_count)](detail::Node& self) {
        if (auto* g = parent_grad(self, 0))
            for (std::size_t k = 0; k < T; ++k)
                for (std::size_t i = 0; i < L && k * hop + i < len; ++i)
                    (*g)[k * L + i] += self.grad[k * hop + i] * inv_count[k * hop + i];
    });
}

// ---------------------------------------------------------------------------
// Losses

Tensor mse_loss(const Tensor& pred, const Tensor& target, Reduction reduction) {
    require(pred.shape() == target.shape(),
            "mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
    const double norm = reduction == Reduction::Mean ? 1.0 / static_cast<double>(pred.numel()) : 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    return make_op_result({1}, {acc * norm}, {pred, target.detach()}, [norm](detail::Node& self) {
        const auto& p = parent_value(self, 0);
        const auto& t = parent_value(self, 1);
        if (auto* g = parent_grad(self, 0))
            for (std::size_t i = 0; i < p.size(); ++i) (*g)[i] += self.grad[0] * 2.0 * norm * (p[i] - t[i]);
    });
}

Tensor cross_entropy_loss(const Tensor& probs, std::span<const std::uint8_t> labels) {
    require_rank2(probs, "cross_entropy_loss");
    const std::size_t T = probs.dim(0), C = probs.dim(1);
    require(labels.size() == T, "cross_entropy_loss: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(T) + " frames");
    std::vector<std::uint8_t> lab(labels.begin(), labels.end());
    for (auto l : lab) require(l < C, "cross_entropy_loss: label out of range");
    double acc = 0.0;
    for (std::size_t t = 0; t < T; ++t) acc -= std::log(std::max(probs(t, lab[t]), kCrossEntropyClamp));
    const double inv_t = T ? 1.0 / static_cast<double>(T) : 0.0;
    return make_op_result({1}, {acc * inv_t}, {probs}, [C, inv_t, lab = std::move(lab)](detail::Node& self) {
        const auto& p = parent_value(self, 0);
        if (auto* g = parent_grad(self, 0))
            for (std::size_t t = 0; t < lab.size(); ++t) {
                const double pt = p[t * C + lab[t]];
                if (pt > kCrossEntropyClamp) (*g)[t * C + lab[t]] -= self.grad[0] * inv_t / pt;
            }
    });
}

} // namespace tdaec
