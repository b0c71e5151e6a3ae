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

// JSON experiment config. Every section and key is optional; unknown keys are
// rejected so typos fail loudly.
//
//   {
//     "seed": 1,
//     "generation": { "n_train": 8, "n_test": 3, "duration_s": 1.0, "rir_taps": 2048,
//                     "train_ser_db": [-6, -3, 0, 3, 6], "test_ser_db": [0, 3.5, 7],
//                     "snr_db": null, "nonlinear": false, "clip_ratio": 0.8,
//                     "sigmoid_gain": null, "corpus_dir": null,
//                     "labels": { "frame_len": 160, "hop": 80, "threshold_db": -40 },
//                     "rooms": [ { "dims": [6, 5, 3], "source": [2, 2.5, 1.5],
//                                  "mic": [3, 2.5, 1.5], "t60": 0.4 } ] },
//     "model": { "N": 512, "L": 160, "hop": 80, "B": 256, "H": 256, "window": 100,
//                "prelu": "near" },
//     "train": { "alpha": 0.001, "lr_start": 1e-4, "lr_end": 1e-8, "epochs": 200,
//                "patience": 10, "val_fraction": 0.1, "seed": 1, "init_seed": 1 },
//     "nlms": { "taps": 1024, "mu": 0.5, "eps": 1e-6 },
//     "fdaf": { "block": 256, "partitions": 8, "mu": 0.5, "eps": 1e-6, "power_smoothing": 0.9 }
//   }
//
// A top-level "seed" seeds generation, training and model init unless the
// sections set their own.

#pragma once

#include "tdaec/baselines.hpp"
#include "tdaec/model.hpp"
#include "tdaec/synth.hpp"
#include "tdaec/training.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace tdaec {

inline constexpr const char* kConfigEnvVar = "TDAEC_CONFIG";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ToolkitConfig {
    GenerationConfig generation;
    ModelConfig model;
    TrainConfig train;
    std::uint64_t init_seed = 1;
    NlmsConfig nlms;
    FdafConfig fdaf;

    // Overrides every seed at once (the --seed flag).
    void set_seed(std::uint64_t seed);
};

ToolkitConfig parse_config(const std::string& text, const std::string& what = "config");
ToolkitConfig load_config(const std::filesystem::path& path);

// $TDAEC_CONFIG if set and non-empty.
std::optional<std::filesystem::path> default_config_path();

} // namespace tdaec
