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

// Checkpoint file, all little endian:
//   "AECK" u32 version
//   model config: 8 x u64 (N, L, hop, B, H, window, classes, prelu)
//   u32 tensor count, then per tensor:
//     u32 name length, name bytes, u32 rank, rank x u64 dims, numel x f64
//   u8 has_state, then optionally the training state
//   "END!"

#pragma once

#include "tdaec/model.hpp"
#include "tdaec/training.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>

namespace tdaec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Checkpoint {
    ModelConfig model;
    AecModelParams params;
    std::optional<TrainingState> state;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& what = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace tdaec
