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

#include "tdaec/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace tdaec {

void require_finite(std::span<const double> values, const std::string& what) {
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw AudioIoError(what + ": non-finite value at index " + std::to_string(i));
}

// ---------------------------------------------------------------------------
// Little-endian primitives

namespace le {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::span<const std::uint8_t> Reader::take(std::size_t n) {
    if (n > remaining())
        throw AudioIoError(what_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                           std::to_string(pos_) + ", " + std::to_string(remaining()) + " left)");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
}

std::uint8_t Reader::u8() { return take(1)[0]; }

std::uint16_t Reader::u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t Reader::u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

std::uint64_t Reader::u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

double Reader::f64() { return std::bit_cast<double>(u64()); }

} // namespace le

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw AudioIoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw AudioIoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw AudioIoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// WAV

namespace {

struct PcmWav {
    int sample_rate = 0;
    std::vector<std::int16_t> pcm;
};

bool has_magic(std::span<const std::uint8_t> b, std::size_t off, const char* magic) {
    return b.size() >= off + 4 && std::memcmp(b.data() + off, magic, 4) == 0;
}

PcmWav parse_pcm_wav(std::span<const std::uint8_t> bytes, const std::string& what) {
    if (!has_magic(bytes, 0, "RIFF") || !has_magic(bytes, 8, "WAVE"))
        throw AudioIoError(what + ": not a RIFF/WAVE file");
    le::Reader r(bytes, what);
    r.take(12);
    bool have_fmt = false;
    PcmWav wav;
    while (r.remaining() >= 8) {
        auto id = r.take(4);
        const std::uint32_t size = r.u32();
        const std::string tag(reinterpret_cast<const char*>(id.data()), 4);
        if (tag == "fmt ") {
            auto body = r.take(size);
            le::Reader f(body, what + " fmt chunk");
            const std::uint16_t format = f.u16();
            const std::uint16_t channels = f.u16();
            const std::uint32_t rate = f.u32();
            f.u32(); // byte rate
            f.u16(); // block align
            const std::uint16_t bits = f.u16();
            if (format != 1) throw AudioIoError(what + ": unsupported format tag " + std::to_string(format) + " (PCM only)");
            if (channels != 1) throw AudioIoError(what + ": " + std::to_string(channels) + " channels, mono required");
            if (bits != 16) throw AudioIoError(what + ": " + std::to_string(bits) + "-bit samples, 16-bit required");
            wav.sample_rate = static_cast<int>(rate);
            have_fmt = true;
        } else if (tag == "data") {
            if (!have_fmt) throw AudioIoError(what + ": data chunk before fmt chunk");
            auto body = r.take(std::min<std::size_t>(size, r.remaining()));
            if (body.size() % 2) throw AudioIoError(what + ": odd data chunk size");
            wav.pcm.resize(body.size() / 2);
            for (std::size_t i = 0; i < wav.pcm.size(); ++i)
                wav.pcm[i] = static_cast<std::int16_t>(body[2 * i] | (body[2 * i + 1] << 8));
            return wav;
        } else {
            r.take(std::min<std::size_t>(size + (size & 1u), r.remaining()));
        }
    }
    throw AudioIoError(what + ": no data chunk");
}

} // namespace

std::int16_t quantize_sample(double x) {
    constexpr double hi = 1.0 - 1.0 / 32768.0;
    const double c = std::clamp(x, -1.0, hi);
    return static_cast<std::int16_t>(std::lround(c * 32768.0));
}

Waveform read_wav(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    auto wav = parse_pcm_wav(bytes, path.string());
    if (wav.sample_rate != kSampleRate)
        throw AudioIoError(path.string() + ": sample rate " + std::to_string(wav.sample_rate) + " Hz, 16000 Hz required");
    Waveform w;
    w.samples.resize(wav.pcm.size());
    for (std::size_t i = 0; i < wav.pcm.size(); ++i) w.samples[i] = wav.pcm[i] / 32768.0;
    return w;
}

void write_wav(const fs::path& path, const Waveform& w) {
    if (w.sample_rate != kSampleRate)
        throw AudioIoError("write_wav: sample rate " + std::to_string(w.sample_rate) + " Hz, 16000 Hz required");
    require_finite(w.samples, "write_wav " + path.string());
    const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    auto tag = [&](const char* s) { out.insert(out.end(), s, s + 4); };
    auto u16 = [&](std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    };
    tag("RIFF");
    le::put_u32(out, 36 + data_bytes);
    tag("WAVE");
    tag("fmt ");
    le::put_u32(out, 16);
    u16(1);
    u16(1);
    le::put_u32(out, kSampleRate);
    le::put_u32(out, kSampleRate * 2);
    u16(2);
    u16(16);
    tag("data");
    le::put_u32(out, data_bytes);
    for (double x : w.samples) u16(static_cast<std::uint16_t>(quantize_sample(x)));
    write_file_bytes(path, out);
}

// ---------------------------------------------------------------------------
// RIR

RoomImpulseResponse load_rir(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    RoomImpulseResponse rir;
    if (has_magic(bytes, 0, "RIFF")) {
        auto wav = parse_pcm_wav(bytes, path.string());
        rir.sample_rate = wav.sample_rate;
        rir.taps.resize(wav.pcm.size());
        for (std::size_t i = 0; i < wav.pcm.size(); ++i) rir.taps[i] = wav.pcm[i] / 32768.0;
    } else if (has_magic(bytes, 0, "RIR1")) {
        le::Reader r(bytes, path.string());
        r.take(4);
        rir.sample_rate = static_cast<int>(r.u32());
        const std::uint32_t n = r.u32();
        if (r.remaining() != static_cast<std::size_t>(n) * 4)
            throw AudioIoError(path.string() + ": header announces " + std::to_string(n) + " taps but payload has " +
                               std::to_string(r.remaining()) + " bytes");
        rir.taps.resize(n);
        for (auto& t : rir.taps) t = r.f32();
    } else {
        throw AudioIoError(path.string() + ": unrecognized RIR container (expected RIFF or RIR1)");
    }
    if (rir.taps.empty()) throw AudioIoError(path.string() + ": empty impulse response");
    if (rir.sample_rate <= 0) throw AudioIoError(path.string() + ": invalid sample rate");
    require_finite(rir.taps, path.string());
    return rir;
}

void save_rir_raw(const fs::path& path, const RoomImpulseResponse& rir) {
    require_finite(rir.taps, "save_rir_raw");
    std::vector<std::uint8_t> out{'R', 'I', 'R', '1'};
    le::put_u32(out, static_cast<std::uint32_t>(rir.sample_rate));
    le::put_u32(out, static_cast<std::uint32_t>(rir.taps.size()));
    for (double t : rir.taps) le::put_f32(out, static_cast<float>(t));
    write_file_bytes(path, out);
}

// ---------------------------------------------------------------------------
// Labels

void write_labels(const fs::path& path, std::span<const std::uint8_t> labels) { write_file_bytes(path, labels); }

std::vector<std::uint8_t> read_labels(const fs::path& path) {
    auto bytes = read_file_bytes(path);
    for (auto b : bytes)
        if (b > 3) throw AudioIoError(path.string() + ": label value " + std::to_string(b) + " outside 0..3");
    return bytes;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

double parse_double(const std::string& key, const std::string& v, std::size_t line) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        if (!std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw AudioIoError("manifest line " + std::to_string(line) + ": bad value for " + key + ": '" + v + "'");
    }
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

DatasetManifest read_manifest(const fs::path& path, bool check_paths) {
    std::ifstream in(path);
    if (!in) throw AudioIoError("cannot open manifest " + path.string());
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    DatasetManifest manifest;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        ManifestRecord rec;
        bool seen_ser = false;
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, '\t')) {
            const auto eq = field.find('=');
            if (eq == std::string::npos)
                throw AudioIoError("manifest line " + std::to_string(lineno) + ": field without '=': " + field);
            const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
            if (key == "mixture_path") rec.mixture_path = resolve(val);
            else if (key == "far_end_path") rec.far_end_path = resolve(val);
            else if (key == "near_end_path") rec.near_end_path = resolve(val);
            else if (key == "label_path") rec.label_path = resolve(val);
            else if (key == "echo_path") rec.echo_path = resolve(val);
            else if (key == "ser_db") { rec.ser_db = parse_double(key, val, lineno); seen_ser = true; }
            else if (key == "snr_db") rec.snr_db = val == "none" ? std::nullopt : std::optional(parse_double(key, val, lineno));
            else if (key == "rir_id") rec.rir_id = static_cast<int>(parse_double(key, val, lineno));
            else if (key == "nonlinear_flag") rec.nonlinear = val == "1" || val == "true";
            else if (key == "split") rec.split = val;
            else if (key == "frame_len") rec.frame_len = static_cast<std::size_t>(parse_double(key, val, lineno));
            else if (key == "hop") rec.hop = static_cast<std::size_t>(parse_double(key, val, lineno));
            // unknown keys are ignored so newer writers stay readable
        }
        if (!seen_ser) throw AudioIoError("manifest line " + std::to_string(lineno) + ": missing ser_db");
        for (const auto* p : {&rec.mixture_path, &rec.far_end_path, &rec.near_end_path, &rec.label_path}) {
            if (p->empty()) throw AudioIoError("manifest line " + std::to_string(lineno) + ": missing path field");
            if (check_paths && !fs::exists(*p))
                throw AudioIoError("manifest line " + std::to_string(lineno) + ": missing file " + p->string());
        }
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
    const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
    auto rel = [&](const fs::path& p) { return fs::relative(p, base).generic_string(); };
    std::ostringstream os;
    for (const auto& r : manifest.records) {
        if (!std::isfinite(r.ser_db) || (r.snr_db && !std::isfinite(*r.snr_db)))
            throw AudioIoError("write_manifest: non-finite SER/SNR");
        os << "mixture_path=" << rel(r.mixture_path) << "\tfar_end_path=" << rel(r.far_end_path)
           << "\tnear_end_path=" << rel(r.near_end_path) << "\tlabel_path=" << rel(r.label_path);
        if (!r.echo_path.empty()) os << "\techo_path=" << rel(r.echo_path);
        os << "\tser_db=" << format_double(r.ser_db) << "\tsnr_db=" << (r.snr_db ? format_double(*r.snr_db) : "none")
           << "\trir_id=" << r.rir_id << "\tnonlinear_flag=" << (r.nonlinear ? 1 : 0) << "\tsplit=" << r.split
           << "\tframe_len=" << r.frame_len << "\thop=" << r.hop << '\n';
    }
    const std::string text = os.str();
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<ManifestRecord> records_in_split(const DatasetManifest& manifest, const std::string& split) {
    std::vector<ManifestRecord> out;
    std::copy_if(manifest.records.begin(), manifest.records.end(), std::back_inserter(out),
                 [&](const ManifestRecord& r) { return r.split == split; });
    return out;
}

} // namespace tdaec
