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

#include "tdaec/audio_io.hpp"
#include "tdaec/model.hpp"
#include "tdaec/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace tdaec {

struct TrainConfig {
    double alpha = 0.001;
    double lr_start = 1e-4;
    double lr_end = 1e-8;
    std::size_t epochs = 200;
    std::size_t patience = 10;
    double val_fraction = 0.1;
    std::uint64_t seed = 1;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// (1 - alpha) * mse + alpha * ce
double combine_loss(double mse, double ce, double alpha);

struct LossParts {
    Tensor total;
    double mse = 0.0; // summed squared error
    double ce = 0.0;  // mean over frames
};

// (1 - alpha) * sum_n (s_hat(n) - s(n))^2 + alpha * CE(class_probs, labels).
LossParts multitask_loss(const Tensor& s_hat, std::span<const double> s, const Tensor& class_probs,
                         std::span<const std::uint8_t> labels, double alpha);

struct TrainingExample {
    std::vector<double> mixture;
    std::vector<double> far_end;
    std::vector<double> near_end;
    std::vector<std::uint8_t> labels; // one per model frame
};

// Forward pass plus loss on one example.
LossParts example_loss(const TrainingExample& ex, const AecModelParams& params, const ModelConfig& mcfg, double alpha);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainingState {
    TrainConfig config;
    std::size_t next_epoch = 0;
    AdamState adam;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    bool stopped = false; // early stop fired or the epoch budget is spent
    std::vector<EpochRecord> history;

    bool operator==(const TrainingState&) const = default;
};

// Current parameters, best-validation snapshot and optimizer/schedule state.
struct TrainSession {
    ModelConfig model;
    AecModelParams params;
    AecModelParams best;
    TrainingState state;
};

TrainSession start_session(const ModelConfig& mcfg, const TrainConfig& tcfg, std::uint64_t init_seed);

struct TrainOptions {
    // When set: best.ckpt, last.ckpt and history.tsv are (re)written after
    // every epoch.
    std::optional<std::filesystem::path> out_dir;
    // Stop this call after this many epochs; the session can be resumed.
    std::optional<std::size_t> max_epochs;
    std::function<void(const EpochRecord&)> on_epoch;
};

// One step per training example (batch of one utterance), shuffled per epoch
// from (seed, epoch). Validation loss decides the best snapshot and early
// stopping. Throws TrainingDiverged on a non-finite loss.
void train(TrainSession& session, const std::vector<TrainingExample>& train_set,
           const std::vector<TrainingExample>& val_set, const TrainOptions& options = {});

// Indices held out for validation: round(fraction * n) clamped to [1, n-1],
// chosen by seed. A single record is used for both training and validation.
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};
SplitIndices validation_split(std::size_t n, double fraction, std::uint64_t seed);

TrainingExample load_example(const ManifestRecord& record, const ModelConfig& mcfg);

// Trains on the manifest's "train" split. If out_dir already holds a
// last.ckpt, training resumes from it.
TrainSession train_from_manifest(const DatasetManifest& manifest, const ModelConfig& mcfg, const TrainConfig& tcfg,
                                 const TrainOptions& options, std::uint64_t init_seed);

void write_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

} // namespace tdaec
