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

#include "tdaec/synth.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace tdaec {

inline constexpr double kErleEnergyFloor = 1e-12;
inline constexpr double kSiSnrCapDb = 60.0;

// 10*log10(mean(y^2) / max(mean(s_hat^2), 1e-12)) over the samples where
// mask is true (all samples when mask is empty). nullopt if nothing selected.
std::optional<double> erle_db(std::span<const double> y, std::span<const double> s_hat,
                              const std::vector<bool>& mask = {});

// ERLE over far-end single-talk (FarOnly) periods.
std::optional<double> erle(std::span<const double> y, std::span<const double> s_hat, const TalkLabelSequence& labels);

// Scale-invariant SNR of s_hat against s, clamped to [-60, 60] dB.
std::optional<double> si_snr_db(std::span<const double> s, std::span<const double> s_hat,
                                const std::vector<bool>& mask = {});

// SI-SNR over double-talk periods.
std::optional<double> si_snr(std::span<const double> s, std::span<const double> s_hat, const TalkLabelSequence& labels);

using ConfusionMatrix = std::array<std::array<std::size_t, kTalkClassCount>, kTalkClassCount>; // [truth][pred]

struct DtdResult {
    double accuracy = 0.0;
    ConfusionMatrix confusion{};
};

DtdResult dtd_accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // row-major, row 0 is the top
};

inline constexpr std::size_t kSpectrogramFft = 512;
inline constexpr std::size_t kSpectrogramHop = 160;

// Hann-windowed log-magnitude spectrogram: one column per frame, one row per
// bin with the highest frequency at the top. 80 dB display range below the
// peak; a silent input yields an all-zero image.
GrayImage spectrogram(std::span<const double> w, std::size_t fft_size = kSpectrogramFft,
                      std::size_t hop = kSpectrogramHop);

// Binary PGM (P5).
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

void spectrogram_image(std::span<const double> w, const std::filesystem::path& out_path);

} // namespace tdaec
