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

#include "tdaec/gradcheck.hpp"

#include "tdaec/model.hpp"
#include "tdaec/random.hpp"
#include "tdaec/synth.hpp"
#include "tdaec/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tdaec {

double grad_rel_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckResult finite_diff_check(const std::string& name, const std::function<Tensor()>& loss_fn,
                                  const std::vector<Tensor>& inputs, std::size_t points_per_input, std::uint64_t seed,
                                  double step) {
    for (auto in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    backward(loss_fn());

    GradCheckResult res;
    res.name = name;
    Rng rng(seed);
    NoGradGuard no_grad;
    for (auto in : inputs) {
        const std::vector<double> analytic(in.grad().begin(), in.grad().end());
        const std::size_t n = in.numel();
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), 0);
        if (n > points_per_input) {
            for (std::size_t i = 0; i < points_per_input; ++i) std::swap(coords[i], coords[i + rng.index(n - i)]);
            coords.resize(points_per_input);
        }
        auto x = in.mutable_data();
        for (std::size_t j : coords) {
            const double saved = x[j];
            x[j] = saved + step;
            const double up = loss_fn().item();
            x[j] = saved - step;
            const double down = loss_fn().item();
            x[j] = saved;
            const double a = analytic.empty() ? 0.0 : analytic[j];
            res.max_rel_error = std::max(res.max_rel_error, grad_rel_error(a, (up - down) / (2.0 * step)));
            res.max_abs_analytic = std::max(res.max_abs_analytic, std::abs(a));
            ++res.points;
        }
    }
    return res;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(v), true);
}

// Values bounded away from the ReLU/PReLU kink so a finite step never crosses it.
Tensor off_kink_tensor(Shape shape, Rng& rng) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.0);
    return Tensor::from(std::move(shape), std::move(v), true);
}

// Scalar probe: sum(y * R) for a fixed random R.
Tensor project(const Tensor& y, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> r(y.numel());
    for (auto& x : r) x = rng.uniform(-1.0, 1.0);
    return sum(mul(y, Tensor::from(y.shape(), std::move(r))));
}

} // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    Rng rng(seed);
    constexpr std::size_t kPoints = 6;
    auto check = [&](const std::string& name, const std::vector<Tensor>& inputs, auto&& fn) {
        const std::uint64_t s = rng.engine()();
        out.push_back(finite_diff_check(name, [&, s] { return project(fn(), s); }, inputs, kPoints, s));
    };

    {
        auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
        check("add", {a, b}, [&] { return add(a, b); });
        check("sub", {a, b}, [&] { return sub(a, b); });
        check("mul", {a, b}, [&] { return mul(a, b); });
        check("scale", {a}, [&] { return scale(a, -1.7); });
        check("sum", {a}, [&] { return scale(sum(a), 1.0); });
    }
    {
        auto x = off_kink_tensor({4, 5}, rng);
        auto slope = Tensor::from({1}, {0.25}, true);
        check("relu", {x}, [&] { return relu(x); });
        check("prelu", {x, slope}, [&] { return prelu(x, slope); });
        check("resigmoid", {x}, [&] { return resigmoid(x); });
        auto y = random_tensor({4, 5}, rng, -3.0, 3.0);
        check("sigmoid", {y}, [&] { return sigmoid(y); });
        check("tanh", {y}, [&] { return tanh(y); });
        check("softmax_rows", {y}, [&] { return softmax_rows(y); });
    }
    {
        auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
        check("matmul", {a, b}, [&] { return matmul(a, b); });
        auto x = random_tensor({6, 4}, rng), w = random_tensor({3, 4}, rng), bias = random_tensor({3}, rng);
        check("pointwise_conv", {x, w, bias}, [&] { return pointwise_conv(x, w, bias); });
        auto p = random_tensor({6, 2}, rng), q = random_tensor({6, 3}, rng);
        check("concat_channels", {p, q}, [&] { return concat_channels({p, q}); });
    }
    {
        auto x = random_tensor({7, 5}, rng, -2.0, 2.0), g = random_tensor({5}, rng, 0.5, 1.5), b = random_tensor({5}, rng);
        check("layer_norm_cumulative", {x, g, b}, [&] { return layer_norm_cumulative(x, g, b); });
    }
    {
        constexpr std::size_t in = 3, H = 4;
        auto x = random_tensor({6, in}, rng);
        LstmWeights w{random_tensor({4 * H, in}, rng, -0.5, 0.5), random_tensor({4 * H, H}, rng, -0.5, 0.5),
                      random_tensor({4 * H}, rng, -0.5, 0.5)};
        check("lstm_layer", {x, w.w_ih, w.w_hh, w.bias}, [&] { return lstm_layer(x, w); });
    }
    {
        auto q = random_tensor({8, 4}, rng), kv = random_tensor({8, 4}, rng);
        check("local_attention", {q, kv}, [&] { return local_attention(q, kv, 3); });
        check("local_attention_full", {q, kv}, [&] { return local_attention(q, kv, 100); });
    }
    {
        auto x = random_tensor({23}, rng);
        check("frame_signal", {x}, [&] { return frame_signal(x, 8, 4); });
        auto f = random_tensor({5, 8}, rng);
        check("overlap_add", {f}, [&] { return overlap_add(f, 4, false); });
        check("overlap_add_normalized", {f}, [&] { return overlap_add(f, 4, true, 21); });
    }
    {
        auto pred = random_tensor({10}, rng), target = random_tensor({10}, rng);
        out.push_back(finite_diff_check("mse_loss", [&] { return mse_loss(pred, target); }, {pred}, kPoints, 11));
        auto probs = random_tensor({6, 4}, rng, 0.1, 1.0);
        const std::vector<std::uint8_t> labels{0, 1, 2, 3, 2, 1};
        out.push_back(finite_diff_check("cross_entropy_loss", [&] { return cross_entropy_loss(probs, labels); }, {probs},
                                        probs.numel(), 12));
        auto logits = random_tensor({6, 4}, rng, -2.0, 2.0);
        auto s_hat = random_tensor({10}, rng);
        std::vector<double> s(10);
        for (auto& v : s) v = rng.uniform(-1.0, 1.0);
        out.push_back(finite_diff_check(
            "multitask_loss", [&] { return multitask_loss(s_hat, s, softmax_rows(logits), labels, 0.3).total; },
            {s_hat, logits}, kPoints, 13));
    }
    {
        // End to end: toy model on a short synthetic clip, probing every parameter tensor.
        ModelConfig cfg = ModelConfig::toy();
        cfg.window = 4;
        const auto params = AecModelParams::init(cfg, seed);
        const std::size_t n = 1200;
        TrainingExample ex;
        ex.far_end = synthetic_speech(n, 0, n, mix_seed(seed, 1));
        ex.near_end = synthetic_speech(n, n / 3, n, mix_seed(seed, 2));
        ex.mixture.resize(n);
        for (std::size_t i = 0; i < n; ++i) ex.mixture[i] = ex.near_end[i] + 0.6 * ex.far_end[i];
        ex.labels.resize(frame_count(n, cfg));
        for (std::size_t t = 0; t < ex.labels.size(); ++t) ex.labels[t] = static_cast<std::uint8_t>(t % 4);
        out.push_back(finite_diff_check(
            "end_to_end", [&] { return example_loss(ex, params, cfg, 0.001).total; }, params.tensors(), 2, 14, kEndToEndStep));
    }
    return out;
}

} // namespace tdaec
