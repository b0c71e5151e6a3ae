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

#include "tdaec/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tdaec {

void adam_update(std::span<double> x, std::span<const double> g, std::vector<double>& m, std::vector<double>& v,
                 const AdamState& state, double lr) {
    if (state.step == 0) throw std::logic_error("adam_update: step counter must be advanced first");
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double gi = g.empty() ? 0.0 : g[i];
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
        x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.numel(), 0.0);
            state.v.emplace_back(p.numel(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: optimizer state does not match parameters");
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.m[i].size() != params[i].numel())
            throw std::invalid_argument("adam_step: moment shape mismatch for parameter " + std::to_string(i));
        adam_update(params[i].mutable_data(), params[i].grad(), state.m[i], state.v[i], state, lr);
    }
}

double lr_at(double epoch, double lr_start, double lr_end, std::size_t epochs) {
    if (!(lr_start >= lr_end && lr_end > 0.0)) throw std::invalid_argument("lr_at: need lr_start >= lr_end > 0");
    if (epochs <= 1) return lr_start;
    const double last = static_cast<double>(epochs - 1);
    if (epoch <= 0.0) return lr_start;
    if (epoch >= last) return lr_end;
    return lr_start * std::pow(lr_end / lr_start, epoch / last);
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
    if (patience == 0) throw std::invalid_argument("early stopping: patience must be >= 1");
}

bool EarlyStopping::update(double val_loss) {
    if (val_loss < best_) {
        best_ = val_loss;
        stale_ = 0;
        return true;
    }
    ++stale_;
    return false;
}

} // namespace tdaec
