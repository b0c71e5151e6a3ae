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

#pragma once

#include "tdaec/tensor.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace tdaec {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<std::vector<double>> m; // one per parameter, same length
    std::vector<std::vector<double>> v;

    bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update over params using their accumulated grads.
// Parameters without a gradient are treated as having a zero gradient. The
// moment buffers are sized lazily on the first call.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

// Raw-array form: updates x in place given g.
void adam_update(std::span<double> x, std::span<const double> g, std::vector<double>& m, std::vector<double>& v,
                 const AdamState& state, double lr);

// lr_start * (lr_end / lr_start)^(epoch / (epochs - 1)); lr_start for a
// single-epoch schedule. Fractional epochs are allowed.
double lr_at(double epoch, double lr_start, double lr_end, std::size_t epochs);

// Stops after `patience` consecutive epochs without a strict improvement.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience);

    // Returns true when an improvement was recorded.
    bool update(double val_loss);
    bool should_stop() const { return stale_ >= patience_; }

    double best() const { return best_; }
    std::size_t stale() const { return stale_; }
    std::size_t patience() const { return patience_; }
    void restore(double best, std::size_t stale) { best_ = best; stale_ = stale; }

private:
    std::size_t patience_;
    double best_;
    std::size_t stale_ = 0;
};

} // namespace tdaec
