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

// Linear adaptive-filter echo cancellers. No double-talk control: the filters
// adapt on every sample/block.

#pragma once

#include "tdaec/audio_io.hpp"
#include "tdaec/fft.hpp"

#include <complex>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace tdaec {

struct NlmsConfig {
    std::size_t taps = 1024;
    double mu = 0.5;
    double eps = 1e-6;

    void validate() const;
};

struct FdafConfig {
    std::size_t block = 256;     // power of two
    std::size_t partitions = 8;
    double mu = 0.5;             // on the NLMS scale
    double eps = 1e-6;
    double power_smoothing = 0.9;

    void validate() const;
    std::size_t filter_length() const { return block * partitions; }
};

struct CancelResult {
    Waveform echo_estimate;
    Waveform residual;
};

// Time-domain NLMS:
//   e(n) = y(n) - w.x(n);  w += mu * e(n) * x(n) / (eps + |x(n)|^2)
class NlmsFilter {
public:
    explicit NlmsFilter(const NlmsConfig& cfg);

    // Consumes one far-end and one microphone sample; returns the echo estimate.
    double process(double far, double mic, double* residual = nullptr);
    const std::vector<double>& weights() const { return weights_; }

private:
    NlmsConfig cfg_;
    std::vector<double> weights_;
    std::vector<double> history_; // doubled ring buffer, newest sample first in the read window
    std::size_t head_ = 0;
};

// Partitioned-block frequency-domain adaptive filter (overlap-save, per-bin
// power normalization, constrained gradient).
class FdafFilter {
public:
    explicit FdafFilter(const FdafConfig& cfg);

    // Processes exactly cfg.block samples; writes the echo estimate.
    void process_block(std::span<const double> far, std::span<const double> mic, std::span<double> echo_estimate);
    // Time-domain taps of all partitions concatenated.
    std::vector<double> impulse_response();

private:
    FdafConfig cfg_;
    RealFft fft_;
    std::vector<double> prev_far_;
    std::deque<std::vector<std::complex<double>>> far_spectra_; // newest first
    std::vector<std::vector<std::complex<double>>> weights_;
    std::vector<double> power_;
    bool power_init_ = false;
};

CancelResult nlms_cancel(std::span<const double> far, std::span<const double> mixture, const NlmsConfig& cfg = {});
CancelResult fdaf_cancel(std::span<const double> far, std::span<const double> mixture, const FdafConfig& cfg = {});

} // namespace tdaec
