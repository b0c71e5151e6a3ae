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

// Reverse-mode automatic differentiation over dense double-precision arrays.
//
// A Tensor is a handle to a graph node. Ops build new nodes that remember their
// parents and an adjoint closure; backward() walks the graph once in reverse
// topological order. Only the ops the echo canceller needs are provided, and
// the heavier ones (LSTM, cumulative layer norm, windowed attention) are fused
// with hand-written adjoints.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdaec {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    std::vector<double>& grad_buffer();
};

} // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t i) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;

    std::span<const double> data() const;
    // Writable view; only meaningful on leaves (parameters, inputs).
    std::span<double> mutable_data();
    double item() const;
    double operator()(std::size_t i) const { return data()[i]; }
    double operator()(std::size_t r, std::size_t c) const;

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool is_leaf() const;

    // Empty span when no gradient has been accumulated yet.
    std::span<const double> grad() const;
    void zero_grad();

    // Same values, no graph history.
    Tensor detach() const;

    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    friend Tensor make_op_result(Shape, std::vector<double>, std::vector<Tensor>,
                                 std::function<void(detail::Node&)>);

    std::shared_ptr<detail::Node> node_;
};

// Builds an op node. The adjoint closure is dropped when grad mode is off or
// no input requires a gradient.
Tensor make_op_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                      std::function<void(detail::Node&)> backward);

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
// Interior gradients are recomputed from scratch on every call, so leaf
// gradients from two calls add up exactly.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Elementwise and reductions

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// slope is a one-element tensor; the negative branch applies only to x < 0.
Tensor prelu(const Tensor& x, const Tensor& slope);

// ---------------------------------------------------------------------------
// Linear algebra on [rows, cols] tensors

Tensor matmul(const Tensor& a, const Tensor& b);
// 1x1 convolution over channels: x[T, in] * w[out, in]^T + bias[out].
// bias may be an undefined Tensor.
Tensor pointwise_conv(const Tensor& x, const Tensor& w, const Tensor& bias = {});
Tensor concat_channels(const std::vector<Tensor>& parts);
// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& x);

// ---------------------------------------------------------------------------
// Sequence ops; time runs along dimension 0.

// Cumulative layer normalization: frame t is normalized with the mean and
// variance of all channels over frames 0..t, then scaled by gain[C] and
// shifted by bias[C].
Tensor layer_norm_cumulative(const Tensor& x, const Tensor& gain, const Tensor& bias);

inline constexpr double kClnVarianceFloor = 1e-8;

struct LstmWeights {
    Tensor w_ih; // [4H, in], gate blocks ordered i, f, g, o
    Tensor w_hh; // [4H, H]
    Tensor bias; // [4H]
};

// Unidirectional LSTM over x[T, in] from zero state; returns h[T, H].
Tensor lstm_layer(const Tensor& x, const LstmWeights& weights);

// For each frame t the query q[t] attends to kv frames max(0, t-W+1)..t with
// scaled dot-product scores q.k / sqrt(D) and returns the weighted sum of kv.
Tensor local_attention(const Tensor& q, const Tensor& kv, std::size_t window);

// x[len] -> [T, frame_len], T = floor((len - frame_len) / hop) + 1.
Tensor frame_signal(const Tensor& x, std::size_t frame_len, std::size_t hop);

// frames[T, frame_len] -> [out_len]. out_len 0 means the natural length
// frame_len + (T-1)*hop; a shorter out_len trims the tail. With normalize,
// each sample is divided by the number of frames covering it.
Tensor overlap_add(const Tensor& frames, std::size_t hop, bool normalize,
                   std::size_t out_len = 0);

// ---------------------------------------------------------------------------
// Losses

enum class Reduction { Sum, Mean };

// Squared error between pred and target. target is treated as a constant.
Tensor mse_loss(const Tensor& pred, const Tensor& target, Reduction reduction = Reduction::Sum);

inline constexpr double kCrossEntropyClamp = 1e-12;

// Mean over frames of -log(prob[t, label[t]]), probabilities clamped at 1e-12.
Tensor cross_entropy_loss(const Tensor& probs, std::span<const std::uint8_t> labels);

} // namespace tdaec
