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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdaec {

inline constexpr int kSampleRate = 16000;

class AudioIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mono signal; amplitudes nominally in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate = kSampleRate;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

struct RoomImpulseResponse {
    std::vector<double> taps;
    int sample_rate = kSampleRate;
    double t60 = 0.0; // seconds, informational
};

// Throws AudioIoError naming `what` if any value is NaN or infinite.
void require_finite(std::span<const double> values, const std::string& what);

// 16-bit PCM mono 16 kHz only. Samples are int16 / 32768.
Waveform read_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono at w.sample_rate (must be 16 kHz). Samples are
// clamped to [-1, 1 - 1/32768] and rounded to the nearest integer step.
void write_wav(const std::filesystem::path& path, const Waveform& w);

std::int16_t quantize_sample(double x);

// Accepts either a 16-bit PCM mono WAV (any rate) or the raw float format:
//   "RIR1" | u32 sample_rate | u32 n_taps | n_taps x f32, all little endian.
RoomImpulseResponse load_rir(const std::filesystem::path& path);
void save_rir_raw(const std::filesystem::path& path, const RoomImpulseResponse& rir);

// One byte per frame.
void write_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);
std::vector<std::uint8_t> read_labels(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset manifest: UTF-8, one record per line, tab separated key=value.
// Paths are stored relative to the manifest's directory.

struct ManifestRecord {
    std::filesystem::path mixture_path;
    std::filesystem::path far_end_path;
    std::filesystem::path near_end_path;
    std::filesystem::path label_path;
    std::filesystem::path echo_path; // optional
    double ser_db = 0.0;
    std::optional<double> snr_db;    // nullopt: no additive noise
    int rir_id = 0;
    bool nonlinear = false;
    std::string split = "train";
    std::size_t frame_len = 160;
    std::size_t hop = 80;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
};

// Resolves relative paths against the manifest's directory. With
// check_paths, every referenced file must exist.
DatasetManifest read_manifest(const std::filesystem::path& path, bool check_paths = true);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

std::vector<ManifestRecord> records_in_split(const DatasetManifest& manifest, const std::string& split);

// Little-endian helpers shared by the binary formats.
namespace le {
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::span<const std::uint8_t> take(std::size_t n);
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};
} // namespace le

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace tdaec
