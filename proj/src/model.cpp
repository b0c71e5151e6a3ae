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

#include "tdaec/model.hpp"

#include "tdaec/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tdaec {

void ModelConfig::validate() const {
    if (N == 0 || L == 0 || B == 0 || H == 0) throw std::invalid_argument("model config: sizes must be positive");
    if (hop < 1 || hop > L) throw std::invalid_argument("model config: hop must lie in [1, L]");
    if (window < 1) throw std::invalid_argument("model config: attention window must be >= 1");
    if (classes != 4) throw std::invalid_argument("model config: class count must be 4");
}

ModelConfig ModelConfig::toy() {
    ModelConfig cfg;
    cfg.N = 64;
    cfg.B = 32;
    cfg.H = 32;
    cfg.window = 10;
    return cfg;
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor const_param(Shape shape, double value) { return Tensor::full(std::move(shape), value, true); }

LstmWeights init_lstm(std::size_t in, std::size_t H, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(H));
    LstmWeights w;
    w.w_ih = uniform_param({4 * H, in}, bound, rng);
    w.w_hh = uniform_param({4 * H, H}, bound, rng);
    std::vector<double> b(4 * H, 0.0);
    std::fill(b.begin() + static_cast<std::ptrdiff_t>(H), b.begin() + static_cast<std::ptrdiff_t>(2 * H), 1.0);
    w.bias = Tensor::from({4 * H}, std::move(b), true);
    return w;
}

Tensor copy_param(const Tensor& t) { return Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true); }

} // namespace

AecModelParams AecModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const auto fan = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
    AecModelParams p;
    p.encoder_basis = uniform_param({cfg.N, cfg.L}, fan(cfg.L), rng);
    p.decoder_basis = uniform_param({cfg.N, cfg.L}, fan(cfg.N), rng);
    p.cln_mix_gain = const_param({cfg.N}, 1.0);
    p.cln_mix_bias = const_param({cfg.N}, 0.0);
    p.cln_far_gain = const_param({cfg.N}, 1.0);
    p.cln_far_bias = const_param({cfg.N}, 0.0);
    p.bottleneck_mix_w = uniform_param({cfg.B, cfg.N}, fan(cfg.N), rng);
    p.bottleneck_mix_b = const_param({cfg.B}, 0.0);
    p.bottleneck_far_w = uniform_param({cfg.B, cfg.N}, fan(cfg.N), rng);
    p.bottleneck_far_b = const_param({cfg.B}, 0.0);
    p.lstm_mix = init_lstm(cfg.B, cfg.H, rng);
    p.lstm_far = init_lstm(cfg.B, cfg.H, rng);
    p.lstm_echo = init_lstm(3 * cfg.H, cfg.H, rng);
    p.lstm_sep = init_lstm(2 * cfg.H, cfg.H, rng);
    p.prelu_slope = const_param({1}, 0.25);
    p.mask_w = uniform_param({cfg.N, cfg.H}, fan(cfg.H), rng);
    p.mask_b = const_param({cfg.N}, 0.0);
    p.classifier_w = uniform_param({cfg.classes, 2 * cfg.H}, fan(2 * cfg.H), rng);
    p.classifier_b = const_param({cfg.classes}, 0.0);
    return p;
}

std::vector<std::pair<std::string, Tensor>> AecModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out{
        {"encoder.basis", encoder_basis},
        {"decoder.basis", decoder_basis},
        {"cln_mix.gain", cln_mix_gain},
        {"cln_mix.bias", cln_mix_bias},
        {"cln_far.gain", cln_far_gain},
        {"cln_far.bias", cln_far_bias},
        {"bottleneck_mix.weight", bottleneck_mix_w},
        {"bottleneck_mix.bias", bottleneck_mix_b},
        {"bottleneck_far.weight", bottleneck_far_w},
        {"bottleneck_far.bias", bottleneck_far_b},
    };
    for (const auto& [name, l] : {std::pair{"lstm_mix", &lstm_mix}, std::pair{"lstm_far", &lstm_far},
                                  std::pair{"lstm_echo", &lstm_echo}, std::pair{"lstm_sep", &lstm_sep}}) {
        out.emplace_back(std::string(name) + ".w_ih", l->w_ih);
        out.emplace_back(std::string(name) + ".w_hh", l->w_hh);
        out.emplace_back(std::string(name) + ".bias", l->bias);
    }
    out.emplace_back("prelu.slope", prelu_slope);
    out.emplace_back("mask_head.weight", mask_w);
    out.emplace_back("mask_head.bias", mask_b);
    out.emplace_back("classifier.weight", classifier_w);
    out.emplace_back("classifier.bias", classifier_b);
    return out;
}

std::vector<Tensor> AecModelParams::tensors() const {
    std::vector<Tensor> out;
    for (auto& [_, t] : named()) out.push_back(t);
    return out;
}

std::size_t AecModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += t.numel();
    return n;
}

AecModelParams AecModelParams::clone() const {
    AecModelParams p;
    p.encoder_basis = copy_param(encoder_basis);
    p.decoder_basis = copy_param(decoder_basis);
    p.cln_mix_gain = copy_param(cln_mix_gain);
    p.cln_mix_bias = copy_param(cln_mix_bias);
    p.cln_far_gain = copy_param(cln_far_gain);
    p.cln_far_bias = copy_param(cln_far_bias);
    p.bottleneck_mix_w = copy_param(bottleneck_mix_w);
    p.bottleneck_mix_b = copy_param(bottleneck_mix_b);
    p.bottleneck_far_w = copy_param(bottleneck_far_w);
    p.bottleneck_far_b = copy_param(bottleneck_far_b);
    for (auto [dst, src] : {std::pair{&p.lstm_mix, &lstm_mix}, std::pair{&p.lstm_far, &lstm_far},
                            std::pair{&p.lstm_echo, &lstm_echo}, std::pair{&p.lstm_sep, &lstm_sep}}) {
        dst->w_ih = copy_param(src->w_ih);
        dst->w_hh = copy_param(src->w_hh);
        dst->bias = copy_param(src->bias);
    }
    p.prelu_slope = copy_param(prelu_slope);
    p.mask_w = copy_param(mask_w);
    p.mask_b = copy_param(mask_b);
    p.classifier_w = copy_param(classifier_w);
    p.classifier_b = copy_param(classifier_b);
    return p;
}

void AecModelParams::zero_grad() {
    for (auto& t : tensors()) t.zero_grad();
}

// ---------------------------------------------------------------------------
// Forward pieces

std::size_t frame_count(std::size_t len, const ModelConfig& cfg) {
    if (len < cfg.L) throw ShapeError("input of " + std::to_string(len) + " samples is shorter than one segment (" +
                                      std::to_string(cfg.L) + ")");
    return (len - cfg.L + cfg.hop - 1) / cfg.hop + 1;
}

Tensor pad_to_frames(std::span<const double> x, const ModelConfig& cfg) {
    const std::size_t T = frame_count(x.size(), cfg);
    std::vector<double> padded(cfg.L + (T - 1) * cfg.hop, 0.0);
    std::copy(x.begin(), x.end(), padded.begin());
    const std::size_t n = padded.size();
    return Tensor::from({n}, std::move(padded));
}

Tensor encode(const Tensor& padded, const Tensor& encoder_basis, const ModelConfig& cfg) {
    return relu(pointwise_conv(frame_signal(padded, cfg.L, cfg.hop), encoder_basis));
}

Tensor encode(std::span<const double> x, const Tensor& encoder_basis, const ModelConfig& cfg) {
    return encode(pad_to_frames(x, cfg), encoder_basis, cfg);
}

CancelOutput cancel(const Tensor& mix_rep, const Tensor& far_rep, const AecModelParams& params, const ModelConfig& cfg) {
    if (mix_rep.shape() != far_rep.shape())
        throw ShapeError("cancel: mixture/far-end representation shapes differ: " + shape_str(mix_rep.shape()) + " vs " +
                         shape_str(far_rep.shape()));
    const Tensor mix = pointwise_conv(layer_norm_cumulative(mix_rep, params.cln_mix_gain, params.cln_mix_bias),
                                      params.bottleneck_mix_w, params.bottleneck_mix_b);
    const Tensor far = pointwise_conv(layer_norm_cumulative(far_rep, params.cln_far_gain, params.cln_far_bias),
                                      params.bottleneck_far_w, params.bottleneck_far_b);
    const Tensor mix_h = lstm_layer(mix, params.lstm_mix);
    const Tensor far_h = lstm_layer(far, params.lstm_far);
    const Tensor aligned = local_attention(mix_h, far_h, cfg.window);
    CancelOutput out;
    out.echo_rep = lstm_layer(concat_channels({mix_h, far_h, aligned}), params.lstm_echo);
    out.near_rep = lstm_layer(concat_channels({out.echo_rep, mix_h}), params.lstm_sep);
    return out;
}

Tensor resigmoid(const Tensor& x) { return mul(relu(x), sigmoid(x)); }

Tensor mask_head(const Tensor& near_rep, const AecModelParams& params, const ModelConfig& cfg) {
    const Tensor act = cfg.prelu == PreluPlacement::NearRep ? prelu(near_rep, params.prelu_slope) : near_rep;
    return resigmoid(pointwise_conv(act, params.mask_w, params.mask_b));
}

Tensor decode_masked(const Tensor& mix_rep, const Tensor& mask, const AecModelParams& params, const ModelConfig& cfg,
                     std::size_t out_len) {
    const Tensor rep = cfg.prelu == PreluPlacement::MixRep ? prelu(mix_rep, params.prelu_slope) : mix_rep;
    const Tensor frames = matmul(mul(mask, rep), params.decoder_basis);
    return overlap_add(frames, cfg.hop, true, out_len);
}

Tensor mask_and_decode(const Tensor& mix_rep, const Tensor& near_rep, const AecModelParams& params,
                       const ModelConfig& cfg, std::size_t out_len) {
    return decode_masked(mix_rep, mask_head(near_rep, params, cfg), params, cfg, out_len);
}

Tensor classify(const Tensor& echo_rep, const Tensor& near_rep, const AecModelParams& params) {
    return softmax_rows(pointwise_conv(concat_channels({echo_rep, near_rep}), params.classifier_w, params.classifier_b));
}

ForwardOutput forward(std::span<const double> mixture, std::span<const double> far_end, const AecModelParams& params,
                      const ModelConfig& cfg) {
    if (mixture.size() != far_end.size())
        throw ShapeError("forward: mixture has " + std::to_string(mixture.size()) + " samples, far-end " +
                         std::to_string(far_end.size()));
    ForwardOutput out;
    out.mix_rep = encode(mixture, params.encoder_basis, cfg);
    const Tensor far_rep = encode(far_end, params.encoder_basis, cfg);
    const auto reps = cancel(out.mix_rep, far_rep, params, cfg);
    out.mask = mask_head(reps.near_rep, params, cfg);
    out.s_hat = decode_masked(out.mix_rep, out.mask, params, cfg, mixture.size());
    out.class_probs = classify(reps.echo_rep, reps.near_rep, params);
    return out;
}

std::vector<std::uint8_t> argmax_rows(const Tensor& probs) {
    const std::size_t T = probs.dim(0), C = probs.dim(1);
    std::vector<std::uint8_t> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto row = probs.data().subspan(t * C, C);
        out[t] = static_cast<std::uint8_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

Inference run_inference(const Waveform& mixture, const Waveform& far_end, const AecModelParams& params,
                        const ModelConfig& cfg) {
    NoGradGuard no_grad;
    const auto out = forward(mixture.samples, far_end.samples, params, cfg);
    Inference inf;
    inf.s_hat.samples.assign(out.s_hat.data().begin(), out.s_hat.data().end());
    inf.classes = argmax_rows(out.class_probs);
    return inf;
}

} // namespace tdaec
