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

// Central finite-difference checks of the reverse-mode adjoints.

#pragma once

#include "tdaec/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace tdaec {

inline constexpr double kGradCheckStep = 1e-6;
// The full model's loss is O(10) while many parameter gradients are O(1e-5),
// so a 1e-6 step drowns in rounding noise there.
inline constexpr double kEndToEndStep = 3e-4;
inline constexpr double kGradCheckFloor = 1e-6;
inline constexpr double kGradCheckTolerance = 1e-4;

// |a - n| / max(|a|, |n|, floor)
double grad_rel_error(double analytic, double numeric, double floor = kGradCheckFloor);

struct GradCheckResult {
    std::string name;
    std::size_t points = 0;
    double max_rel_error = 0.0;
    double max_abs_analytic = 0.0;
};

// Compares d loss / d inputs[i][j] from one backward pass against
// (f(x + h) - f(x - h)) / 2h at `points_per_input` random coordinates of each
// input (all coordinates if the input is smaller).
GradCheckResult finite_diff_check(const std::string& name, const std::function<Tensor()>& loss_fn,
                                  const std::vector<Tensor>& inputs, std::size_t points_per_input, std::uint64_t seed,
                                  double step = kGradCheckStep);

// Every differentiable op, the multitask loss and an end-to-end toy model.
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed = 7);

} // namespace tdaec
