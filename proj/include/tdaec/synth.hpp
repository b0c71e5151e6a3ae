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

// Echo-scenario synthesis: room impulse responses, loudspeaker nonlinearity,
// echo-path convolution, SER/SNR mixing and four-class frame labelling.

#pragma once

#include "tdaec/audio_io.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace tdaec {

class SynthError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class TalkClass : std::uint8_t { Silence = 0, NearOnly = 1, FarOnly = 2, DoubleTalk = 3 };

inline constexpr std::size_t kTalkClassCount = 4;

struct TalkLabelSequence {
    std::vector<std::uint8_t> labels;
    std::size_t frame_len = 160;
    std::size_t hop = 80;
};

struct LabelConfig {
    std::size_t frame_len = 160;
    std::size_t hop = 80;
    // Relative to the signal's loudest frame, in dB of mean frame power.
    double threshold_db = -40.0;
};

// ceil((len - frame_len) / hop) + 1; a signal shorter than one frame has one
// (zero padded) frame.
std::size_t label_count(std::size_t signal_len, std::size_t frame_len, std::size_t hop);

// Per-frame voice activity: 10*log10(frame energy / frame_len) above the
// signal's peak frame level plus threshold_db. Frames past the end are zero
// padded. A signal with no energy is inactive everywhere.
std::vector<bool> frame_activity(std::span<const double> x, const LabelConfig& cfg);

TalkLabelSequence label_frames(std::span<const double> near, std::span<const double> echo,
                               const LabelConfig& cfg = {});

// Sample n is selected iff it is covered by at least one frame and every frame
// covering it carries `cls`.
std::vector<bool> select_samples(const TalkLabelSequence& labels, std::size_t n_samples, TalkClass cls);

// ---------------------------------------------------------------------------
// Room impulse responses (image-source method, exponential energy decay)

struct RoomGeometry {
    std::array<double, 3> dims{6.0, 5.0, 3.0};
    std::array<double, 3> source{2.0, 2.5, 1.5};
    std::array<double, 3> mic{3.0, 2.5, 1.5};
};

inline constexpr double kSpeedOfSound = 343.0;

RoomImpulseResponse simulate_rir(const RoomGeometry& room, double t60, std::size_t n_taps,
                                 int sample_rate = kSampleRate);

// ---------------------------------------------------------------------------
// Echo path

struct EchoPathConfig {
    RoomImpulseResponse rir;
    bool nonlinear = false;
    double clip_ratio = 0.8;
    // Unset: chosen per signal so the distorted output keeps the RMS of its input.
    std::optional<double> sigmoid_gain;
    double sigmoid_slope_pos = 4.0;
    double sigmoid_slope_neg = 0.5;

    void validate() const;
};

// clamp(x, -c, c) with c = clip_ratio * max|x|.
std::vector<double> hard_clip(std::span<const double> x, double clip_ratio);

// gain * (2 / (1 + exp(-a*b)) - 1), b = 1.5x - 0.3x^2, a = slope_pos if b > 0.
std::vector<double> sigmoidal_distort(std::span<const double> x, const EchoPathConfig& cfg);

// Full linear convolution truncated to len(x).
std::vector<double> convolve_truncated(std::span<const double> x, std::span<const double> g);

std::vector<double> apply_echo_path(std::span<const double> x, const EchoPathConfig& cfg);

// ---------------------------------------------------------------------------
// Mixing

struct SerMeasurement {
    double ser_db = 0.0;
    bool fallback = false; // no double-talk samples; whole-signal energies used
};

// SER over double-talk samples of `labels`.
SerMeasurement measure_ser(std::span<const double> near, std::span<const double> echo,
                           const TalkLabelSequence& labels);

struct SerMix {
    std::vector<double> mixture;
    std::vector<double> scaled_echo;
    double scale = 1.0;
    bool fallback = false;
};

// Scales the echo so the double-talk SER equals ser_db; near-end untouched.
// Without a hint, labels come from label_frames(near, echo) with defaults.
SerMix mix_at_ser(std::span<const double> near, std::span<const double> echo, double ser_db,
                  const TalkLabelSequence* labels_hint = nullptr);

inline constexpr double kNoiseDisabled = std::numeric_limits<double>::infinity();

// y + k*noise with 10*log10(E[ref^2] / E[(k*noise)^2]) == snr_db.
// snr_db == +inf returns y unchanged.
std::vector<double> add_noise_at_snr(std::span<const double> y, std::span<const double> noise, double snr_db,
                                     std::span<const double> ref);

std::vector<double> white_noise(std::size_t n, std::uint64_t seed);

// Speech-like test signal: harmonic voiced bursts and noisy unvoiced bursts
// inside [start, end), exact zeros elsewhere and in inter-syllable gaps.
std::vector<double> synthetic_speech(std::size_t n, std::size_t start, std::size_t end, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Scenarios and datasets

struct MixtureScenario {
    Waveform far_end;
    Waveform near_end;
    Waveform echo;
    std::optional<Waveform> noise;
    Waveform mixture;
    TalkLabelSequence labels;
    double ser_db = 0.0;
    std::optional<double> snr_db;
    bool ser_fallback = false;
    int rir_id = 0;
    bool nonlinear = false;
};

struct ScenarioSpec {
    double ser_db = 0.0;
    std::optional<double> snr_db;
    std::size_t n_samples = kSampleRate;
    LabelConfig labels;
    double peak_limit = 0.9;
};

// Builds one scenario from a far-end and near-end source. The whole scenario is
// scaled down if needed so max|mixture| <= peak_limit (SER/SNR unchanged).
MixtureScenario make_scenario(std::span<const double> far, std::span<const double> near,
                              const EchoPathConfig& path, const ScenarioSpec& spec, std::uint64_t noise_seed);

struct RoomSpec {
    RoomGeometry geometry;
    double t60 = 0.3;
};

struct GenerationConfig {
    std::uint64_t seed = 1;
    std::size_t n_train = 8;
    std::size_t n_test = 3;
    double duration_s = 1.0;
    std::vector<RoomSpec> rooms; // empty: seven rooms spanning T60 0.2..1.25 s
    std::size_t rir_taps = 2048;
    std::vector<double> train_ser_db{-6.0, -3.0, 0.0, 3.0, 6.0};
    std::vector<double> test_ser_db{0.0, 3.5, 7.0};
    std::optional<double> snr_db;
    bool nonlinear = false;
    double clip_ratio = 0.8;
    std::optional<double> sigmoid_gain;
    LabelConfig labels;
    std::optional<std::filesystem::path> corpus_dir;
    std::size_t jobs = 1;
};

std::vector<RoomSpec> default_rooms(std::uint64_t seed);

// Training records draw uniformly (with replacement) from all rooms but the
// last; test records use the last room. Writes WAV and label files plus
// `manifest.tsv` under out_dir and returns the manifest.
DatasetManifest build_dataset(const GenerationConfig& config, const std::filesystem::path& out_dir);

} // namespace tdaec
