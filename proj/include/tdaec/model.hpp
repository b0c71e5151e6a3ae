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

// End-to-end time-domain echo canceller.
//
//   mixture, far-end --encode--> [T, N] --cLN, 1x1 conv--> [T, B] per path
//   mix path: LSTM -> q;  far path: LSTM -> k, v
//   aligned  = local_attention(q, k/v, W)
//   echo     = LSTM(concat(q, k, aligned))
//   near     = LSTM(concat(echo, q))
//   mask     = resigmoid(1x1 conv(prelu(near)))      [T, N]
//   s_hat    = overlap_add((mask * mix_rep) V)
//   classes  = softmax(linear(concat(echo, near)))   [T, 4]
//
// Every stage is frame causal.

#pragma once

#include "tdaec/audio_io.hpp"
#include "tdaec/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tdaec {

enum class PreluPlacement : std::uint8_t {
    NearRep = 0, // prelu on the separated near-end representation, before the mask head
    MixRep = 1,  // prelu on the encoded mixture, right before masking
};

struct ModelConfig {
    std::size_t N = 512;       // encoder basis count
    std::size_t L = 160;       // segment length (samples)
    std::size_t hop = 80;      // segment stride
    std::size_t B = 256;       // bottleneck channels
    std::size_t H = 256;       // LSTM hidden size
    std::size_t window = 100;  // attention look-back in frames
    std::size_t classes = 4;
    PreluPlacement prelu = PreluPlacement::NearRep;

    void validate() const;
    // N=64, B=32, H=32, W=10.
    static ModelConfig toy();
    bool operator==(const ModelConfig&) const = default;
};

struct AecModelParams {
    Tensor encoder_basis; // U [N, L]
    Tensor decoder_basis; // V [N, L]
    Tensor cln_mix_gain, cln_mix_bias; // [N]
    Tensor cln_far_gain, cln_far_bias; // [N]
    Tensor bottleneck_mix_w, bottleneck_mix_b; // [B, N], [B]
    Tensor bottleneck_far_w, bottleneck_far_b;
    LstmWeights lstm_mix;  // B -> H
    LstmWeights lstm_far;  // B -> H
    LstmWeights lstm_echo; // 3H -> H
    LstmWeights lstm_sep;  // 2H -> H
    Tensor prelu_slope;    // [1]
    Tensor mask_w, mask_b; // [N, H], [N]
    Tensor classifier_w, classifier_b; // [4, 2H], [4]

    // Uniform(+-1/sqrt(fan_in)) weights, unit cLN gains, forget-gate bias 1,
    // PReLU slope 0.25.
    static AecModelParams init(const ModelConfig& cfg, std::uint64_t seed);

    // Stable name -> handle list; handles share storage with the members.
    std::vector<std::pair<std::string, Tensor>> named() const;
    std::vector<Tensor> tensors() const;
    std::size_t parameter_count() const;

    AecModelParams clone() const;
    void zero_grad();
};

// Frames for a len-sample input after zero padding the tail:
// ceil((len - L) / hop) + 1.
std::size_t frame_count(std::size_t len, const ModelConfig& cfg);

// Zero-pads x to L + (T-1)*hop samples.
Tensor pad_to_frames(std::span<const double> x, const ModelConfig& cfg);

// relu(frames(x) U^T): [T, N]. x must already span whole frames.
Tensor encode(const Tensor& padded, const Tensor& encoder_basis, const ModelConfig& cfg);
Tensor encode(std::span<const double> x, const Tensor& encoder_basis, const ModelConfig& cfg);

struct CancelOutput {
    Tensor near_rep; // [T, H]
    Tensor echo_rep; // [T, H]
};

CancelOutput cancel(const Tensor& mix_rep, const Tensor& far_rep, const AecModelParams& params, const ModelConfig& cfg);

// relu(x) * sigmoid(x)
Tensor resigmoid(const Tensor& x);

Tensor mask_head(const Tensor& near_rep, const AecModelParams& params, const ModelConfig& cfg);

// Applies `mask` to mix_rep and decodes to out_len samples (overlap count
// normalized, padded tail trimmed).
Tensor decode_masked(const Tensor& mix_rep, const Tensor& mask, const AecModelParams& params, const ModelConfig& cfg,
                     std::size_t out_len);

Tensor mask_and_decode(const Tensor& mix_rep, const Tensor& near_rep, const AecModelParams& params,
                       const ModelConfig& cfg, std::size_t out_len);

Tensor classify(const Tensor& echo_rep, const Tensor& near_rep, const AecModelParams& params);

struct ForwardOutput {
    Tensor s_hat;       // [len]
    Tensor class_probs; // [T, 4]
    Tensor mask;        // [T, N]
    Tensor mix_rep;     // [T, N]
};

ForwardOutput forward(std::span<const double> mixture, std::span<const double> far_end, const AecModelParams& params,
                      const ModelConfig& cfg);

std::vector<std::uint8_t> argmax_rows(const Tensor& probs);

// Inference without graph recording.
struct Inference {
    Waveform s_hat;
    std::vector<std::uint8_t> classes;
};
Inference run_inference(const Waveform& mixture, const Waveform& far_end, const AecModelParams& params,
                        const ModelConfig& cfg);

} // namespace tdaec
