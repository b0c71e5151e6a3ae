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

#include "tdaec/baselines.hpp"

#include <algorithm>
#include <stdexcept>

namespace tdaec {

void NlmsConfig::validate() const {
    if (taps == 0) throw std::invalid_argument("nlms: taps must be positive");
    if (!(mu > 0.0 && mu <= 2.0)) throw std::invalid_argument("nlms: mu must lie in (0, 2]");
    if (!(eps > 0.0)) throw std::invalid_argument("nlms: eps must be positive");
}

void FdafConfig::validate() const {
    if (block < 2 || (block & (block - 1))) throw std::invalid_argument("fdaf: block length must be a power of two");
    if (partitions == 0) throw std::invalid_argument("fdaf: partitions must be >= 1");
    if (!(mu > 0.0 && mu <= 2.0)) throw std::invalid_argument("fdaf: mu must lie in (0, 2]");
    if (!(eps > 0.0)) throw std::invalid_argument("fdaf: eps must be positive");
    if (!(power_smoothing >= 0.0 && power_smoothing < 1.0)) throw std::invalid_argument("fdaf: power_smoothing must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// NLMS

NlmsFilter::NlmsFilter(const NlmsConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    weights_.assign(cfg_.taps, 0.0);
    history_.assign(2 * cfg_.taps, 0.0);
}

double NlmsFilter::process(double far, double mic, double* residual) {
    const std::size_t F = cfg_.taps;
    head_ = head_ == 0 ? F - 1 : head_ - 1;
    history_[head_] = far;
    history_[head_ + F] = far;
    const double* x = &history_[head_]; // x[0] newest

    double estimate = 0.0, energy = 0.0;
    for (std::size_t j = 0; j < F; ++j) {
        estimate += weights_[j] * x[j];
        energy += x[j] * x[j];
    }
    const double e = mic - estimate;
    const double step = cfg_.mu * e / (cfg_.eps + energy);
    if (step != 0.0)
        for (std::size_t j = 0; j < F; ++j) weights_[j] += step * x[j];
    if (residual) *residual = e;
    return estimate;
}

CancelResult nlms_cancel(std::span<const double> far, std::span<const double> mixture, const NlmsConfig& cfg) {
    if (far.size() != mixture.size()) throw std::invalid_argument("nlms_cancel: far-end and mixture lengths differ");
    NlmsFilter filter(cfg);
    CancelResult out;
    out.echo_estimate.samples.resize(far.size());
    out.residual.samples.resize(far.size());
    for (std::size_t n = 0; n < far.size(); ++n)
        out.echo_estimate.samples[n] = filter.process(far[n], mixture[n], &out.residual.samples[n]);
    return out;
}

// ---------------------------------------------------------------------------
// FDAF

FdafFilter::FdafFilter(const FdafConfig& cfg) : cfg_(cfg), fft_((cfg.validate(), 2 * cfg.block)) {
    prev_far_.assign(cfg_.block, 0.0);
    const std::size_t bins = fft_.bins();
    for (std::size_t p = 0; p < cfg_.partitions; ++p) far_spectra_.emplace_back(bins);
    weights_.assign(cfg_.partitions, std::vector<std::complex<double>>(bins));
    power_.assign(bins, 0.0);
}

void FdafFilter::process_block(std::span<const double> far, std::span<const double> mic,
                               std::span<double> echo_estimate) {
    const std::size_t Lb = cfg_.block, N = 2 * Lb, bins = fft_.bins(), P = cfg_.partitions;
    if (far.size() != Lb || mic.size() != Lb || echo_estimate.size() != Lb)
        throw std::invalid_argument("FdafFilter::process_block: block size mismatch");

    std::vector<double> window(N);
    std::copy(prev_far_.begin(), prev_far_.end(), window.begin());
    std::copy(far.begin(), far.end(), window.begin() + static_cast<std::ptrdiff_t>(Lb));
    std::copy(far.begin(), far.end(), prev_far_.begin());

    far_spectra_.pop_back();
    far_spectra_.emplace_front(bins);
    fft_.forward(window, far_spectra_.front());

    const auto& X0 = far_spectra_.front();
    for (std::size_t k = 0; k < bins; ++k) {
        const double p = std::norm(X0[k]);
        power_[k] = power_init_ ? cfg_.power_smoothing * power_[k] + (1.0 - cfg_.power_smoothing) * p : p;
    }
    power_init_ = true;

    std::vector<std::complex<double>> Y(bins);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t k = 0; k < bins; ++k) Y[k] += weights_[p][k] * far_spectra_[p][k];
    std::vector<double> y(N);
    fft_.inverse(Y, y);

    std::vector<double> err(N, 0.0);
    for (std::size_t i = 0; i < Lb; ++i) {
        echo_estimate[i] = y[Lb + i];
        err[Lb + i] = mic[i] - y[Lb + i];
    }
    std::vector<std::complex<double>> E(bins);
    fft_.forward(err, E);

    const double step = 2.0 * cfg_.mu / static_cast<double>(P);
    std::vector<std::complex<double>> G(bins);
    std::vector<double> g(N);
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t k = 0; k < bins; ++k) G[k] = std::conj(far_spectra_[p][k]) * E[k] / (power_[k] + cfg_.eps);
        fft_.inverse(G, g);
        std::fill(g.begin() + static_cast<std::ptrdiff_t>(Lb), g.end(), 0.0); // gradient constraint
        fft_.forward(g, G);
        for (std::size_t k = 0; k < bins; ++k) weights_[p][k] += step * G[k];
    }
}

std::vector<double> FdafFilter::impulse_response() {
    const std::size_t Lb = cfg_.block;
    std::vector<double> taps;
    std::vector<double> w(2 * Lb);
    for (const auto& W : weights_) {
        fft_.inverse(W, w);
        taps.insert(taps.end(), w.begin(), w.begin() + static_cast<std::ptrdiff_t>(Lb));
    }
    return taps;
}

CancelResult fdaf_cancel(std::span<const double> far, std::span<const double> mixture, const FdafConfig& cfg) {
    if (far.size() != mixture.size()) throw std::invalid_argument("fdaf_cancel: far-end and mixture lengths differ");
    FdafFilter filter(cfg);
    const std::size_t Lb = cfg.block, n = far.size();
    CancelResult out;
    out.echo_estimate.samples.assign(n, 0.0);
    out.residual.samples.assign(n, 0.0);
    std::vector<double> xb(Lb), yb(Lb), est(Lb);
    for (std::size_t start = 0; start < n; start += Lb) {
        const std::size_t len = std::min(Lb, n - start);
        std::fill(xb.begin(), xb.end(), 0.0);
        std::fill(yb.begin(), yb.end(), 0.0);
        std::copy_n(far.begin() + static_cast<std::ptrdiff_t>(start), len, xb.begin());
        std::copy_n(mixture.begin() + static_cast<std::ptrdiff_t>(start), len, yb.begin());
        filter.process_block(xb, yb, est);
        for (std::size_t i = 0; i < len; ++i) {
            out.echo_estimate.samples[start + i] = est[i];
            out.residual.samples[start + i] = mixture[start + i] - est[i];
        }
    }
    return out;
}

} // namespace tdaec
