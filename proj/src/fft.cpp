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

#include "tdaec/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace tdaec {

namespace {
// FFTW's planner is not thread safe.
std::mutex g_planner_mutex;
} // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
    if (n < 2 || n % 2) throw std::invalid_argument("RealFft: size must be even and >= 2");
    std::lock_guard lock(g_planner_mutex);
    real_ = fftw_alloc_real(n);
    auto* spec = fftw_alloc_complex(n / 2 + 1);
    spectrum_ = spec;
    const int size = static_cast<int>(n);
    forward_plan_ = fftw_plan_dft_r2c_1d(size, real_, spec, FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_c2r_1d(size, spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    std::lock_guard lock(g_planner_mutex);
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
    fftw_free(real_);
    fftw_free(spectrum_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    if (in.size() != n_ || out.size() != bins()) throw std::invalid_argument("RealFft::forward: size mismatch");
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(static_cast<fftw_plan>(forward_plan_));
    const auto* spec = static_cast<const fftw_complex*>(spectrum_);
    for (std::size_t k = 0; k < bins(); ++k) out[k] = {spec[k][0], spec[k][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    if (in.size() != bins() || out.size() != n_) throw std::invalid_argument("RealFft::inverse: size mismatch");
    auto* spec = static_cast<fftw_complex*>(spectrum_);
    for (std::size_t k = 0; k < bins(); ++k) {
        spec[k][0] = in[k].real();
        spec[k][1] = in[k].imag();
    }
    fftw_execute(static_cast<fftw_plan>(inverse_plan_));
    const double inv_n = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = real_[i] * inv_n;
}

} // namespace tdaec
