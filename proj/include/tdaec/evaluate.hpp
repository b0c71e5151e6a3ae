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
#include "tdaec/baselines.hpp"
#include "tdaec/metrics.hpp"
#include "tdaec/model.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tdaec {

struct EvalItem {
    std::vector<double> mixture;
    std::vector<double> far_end;
    std::vector<double> near_end;
    TalkLabelSequence labels;
    double ser_db = 0.0;
};

struct CancelOutcome {
    std::vector<double> s_hat;
    std::optional<std::vector<std::uint8_t>> classes; // per-frame talk class, if the system predicts one
};

using Canceller = std::function<CancelOutcome(const EvalItem&)>;

Canceller model_canceller(const AecModelParams& params, const ModelConfig& cfg);
Canceller nlms_canceller(const NlmsConfig& cfg);
Canceller fdaf_canceller(const FdafConfig& cfg);
// s_hat := near-end, classes := ground truth.
Canceller oracle_canceller();
// s_hat := mixture.
Canceller identity_canceller();

struct LevelStats {
    std::string ser; // formatted SER level, or "all"
    std::size_t records = 0;
    std::optional<double> erle_db;   // mean over records with far-end single talk
    std::optional<double> si_snr_db; // mean over records with double talk
    std::optional<double> dtd_accuracy; // pooled over frames
    ConfusionMatrix confusion{};
};

struct EvalReport {
    std::vector<LevelStats> levels; // ascending SER
    LevelStats overall;
};

EvalItem load_eval_item(const ManifestRecord& record);

EvalReport evaluate(const std::vector<EvalItem>& items, const Canceller& canceller, std::size_t jobs = 1);
EvalReport evaluate_manifest(const DatasetManifest& manifest, const std::string& split, const Canceller& canceller,
                             std::size_t jobs = 1);

// Lines of "metric\tser_db\tvalue" ("absent" when undefined), then one
// "confusion\tser_db\ttruth\tc0\tc1\tc2\tc3" line per truth class.
std::string format_report(const EvalReport& report);
void write_report(const std::filesystem::path& path, const EvalReport& report);

} // namespace tdaec
