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

#include "tdaec/synth.hpp"

#include "tdaec/parallel.hpp"
#include "tdaec/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace fs = std::filesystem;

namespace tdaec {

namespace {

double mean_square(std::span<const double> x, const std::vector<bool>* mask = nullptr) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!mask || (*mask)[i]) {
            acc += x[i] * x[i];
            ++n;
        }
    return n ? acc / static_cast<double>(n) : 0.0;
}

double max_abs(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

double noise_gain(std::span<const double> noise, double snr_db, std::span<const double> ref) {
    const double ev = mean_square(noise), er = mean_square(ref);
    if (ev <= 0.0) throw SynthError("add_noise_at_snr: zero-energy noise");
    return std::sqrt(er / (ev * std::pow(10.0, snr_db / 10.0)));
}

} // namespace

// ---------------------------------------------------------------------------
// Labelling

std::size_t label_count(std::size_t signal_len, std::size_t frame_len, std::size_t hop) {
    if (frame_len == 0 || hop == 0) throw SynthError("label_count: frame_len and hop must be positive");
    if (signal_len <= frame_len) return 1;
    return (signal_len - frame_len + hop - 1) / hop + 1;
}

std::vector<bool> frame_activity(std::span<const double> x, const LabelConfig& cfg) {
    if (cfg.hop < 1 || cfg.frame_len < cfg.hop) throw SynthError("frame_activity: need frame_len >= hop >= 1");
    const std::size_t T = label_count(x.size(), cfg.frame_len, cfg.hop);
    std::vector<double> level(T);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < T; ++k) {
        double e = 0.0;
        const std::size_t begin = k * cfg.hop, end = std::min(x.size(), begin + cfg.frame_len);
        for (std::size_t n = begin; n < end; ++n) e += x[n] * x[n];
        level[k] = e > 0.0 ? 10.0 * std::log10(e / static_cast<double>(cfg.frame_len))
                           : -std::numeric_limits<double>::infinity();
        peak = std::max(peak, level[k]);
    }
    std::vector<bool> active(T, false);
    if (!std::isfinite(peak)) return active;
    for (std::size_t k = 0; k < T; ++k) active[k] = level[k] > peak + cfg.threshold_db;
    return active;
}

TalkLabelSequence label_frames(std::span<const double> near, std::span<const double> echo, const LabelConfig& cfg) {
    if (near.size() != echo.size()) throw SynthError("label_frames: near-end and echo lengths differ");
    const auto near_on = frame_activity(near, cfg);
    const auto echo_on = frame_activity(echo, cfg);
    TalkLabelSequence out;
    out.frame_len = cfg.frame_len;
    out.hop = cfg.hop;
    out.labels.resize(near_on.size());
    for (std::size_t k = 0; k < near_on.size(); ++k)
        out.labels[k] = static_cast<std::uint8_t>((near_on[k] ? 1 : 0) + (echo_on[k] ? 2 : 0));
    return out;
}

std::vector<bool> select_samples(const TalkLabelSequence& labels, std::size_t n_samples, TalkClass cls) {
    const std::size_t T = labels.labels.size();
    const std::size_t fl = labels.frame_len, hop = labels.hop;
    std::vector<bool> mask(n_samples, false);
    if (T == 0) return mask;
    const auto want = static_cast<std::uint8_t>(cls);
    for (std::size_t n = 0; n < n_samples; ++n) {
        const std::size_t k_lo = n >= fl ? (n - fl) / hop + 1 : 0;
        const std::size_t k_hi = std::min(n / hop, T - 1);
        if (k_lo > k_hi) continue;
        bool all = true;
        for (std::size_t k = k_lo; k <= k_hi && all; ++k) all = labels.labels[k] == want;
        mask[n] = all;
    }
    return mask;
}

// ---------------------------------------------------------------------------
// RIR

RoomImpulseResponse simulate_rir(const RoomGeometry& room, double t60, std::size_t n_taps, int sample_rate) {
    if (t60 < 0.1 || t60 > 1.5) throw SynthError("simulate_rir: t60 must lie in [0.1, 1.5] s");
    if (n_taps == 0) throw SynthError("simulate_rir: n_taps must be positive");
    for (int a = 0; a < 3; ++a) {
        const double L = room.dims[static_cast<std::size_t>(a)];
        if (!(L > 0.0)) throw SynthError("simulate_rir: room dimensions must be positive");
        for (const auto* p : {&room.source, &room.mic}) {
            const double v = (*p)[static_cast<std::size_t>(a)];
            if (!(v > 0.0 && v < L)) throw SynthError("simulate_rir: source/mic must lie strictly inside the room");
        }
    }
    const auto [Lx, Ly, Lz] = room.dims;
    const double fs = sample_rate;
    const auto cut = static_cast<std::size_t>(std::ceil(t60 * fs));
    // Render past t60 so the envelope sees the whole decay.
    const std::size_t span = std::max(n_taps, cut + cut / 2 + 1);
    const double max_dist = static_cast<double>(span) / fs * kSpeedOfSound;
    std::array<int, 3> reach{};
    for (std::size_t a = 0; a < 3; ++a) reach[a] = static_cast<int>(std::ceil(max_dist / (2.0 * room.dims[a]))) + 1;

    std::vector<double> h(span, 0.0);
    // Allen-Berkley images: coordinate (1-2u)*src + 2*n*L per axis; 1/r spreading.
    for (int nx = -reach[0]; nx <= reach[0]; ++nx)
        for (int ux = 0; ux <= 1; ++ux) {
            const double dx = (1 - 2 * ux) * room.source[0] + 2.0 * nx * Lx - room.mic[0];
            for (int ny = -reach[1]; ny <= reach[1]; ++ny)
                for (int uy = 0; uy <= 1; ++uy) {
                    const double dy = (1 - 2 * uy) * room.source[1] + 2.0 * ny * Ly - room.mic[1];
                    if (std::abs(dx) > max_dist || std::abs(dy) > max_dist) continue;
                    for (int nz = -reach[2]; nz <= reach[2]; ++nz)
                        for (int uz = 0; uz <= 1; ++uz) {
                            const double dz = (1 - 2 * uz) * room.source[2] + 2.0 * nz * Lz - room.mic[2];
                            const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
                            const auto delay = static_cast<std::size_t>(std::lround(dist / kSpeedOfSound * fs));
                            if (delay >= span) continue;
                            h[delay] += 1.0 / (4.0 * std::numbers::pi * std::max(dist, 0.01));
                        }
                }
        }

    // Uniform wall absorption is an exp(-rate * t) envelope on the image sum.
    // Pick the smallest rate whose energy after t60 is at most 1e-6 of the
    // total; truncating to n_taps afterwards can only lower that ratio.
    auto tail_ratio = [&](double rate) {
        double total = 0.0, tail = 0.0;
        for (std::size_t i = 0; i < span; ++i) {
            const double e = h[i] * h[i] * std::exp(-2.0 * rate * static_cast<double>(i) / fs);
            total += e;
            if (i >= cut) tail += e;
        }
        return total > 0.0 ? tail / total : 0.0;
    };
    double lo = 0.0, hi = 3.0 * std::numbers::ln10 / t60;
    while (tail_ratio(hi) > 1e-6) hi *= 2.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (tail_ratio(mid) > 1e-6 ? lo : hi) = mid;
    }
    h.resize(n_taps);
    for (std::size_t i = 0; i < n_taps; ++i) h[i] *= std::exp(-hi * static_cast<double>(i) / fs);
    const double peak = max_abs(h);
    if (peak > 0.0)
        for (auto& v : h) v /= peak;
    return RoomImpulseResponse{std::move(h), sample_rate, t60};
}

// ---------------------------------------------------------------------------
// Echo path

void EchoPathConfig::validate() const {
    if (rir.taps.empty()) throw SynthError("echo path: empty RIR");
    if (rir.sample_rate != kSampleRate) throw SynthError("echo path: RIR sample rate must be 16000 Hz");
    if (!(clip_ratio > 0.0 && clip_ratio <= 1.0)) throw SynthError("echo path: clip_ratio must lie in (0, 1]");
    if (!(sigmoid_slope_pos > 0.0 && sigmoid_slope_neg > 0.0)) throw SynthError("echo path: sigmoid slopes must be positive");
}

std::vector<double> hard_clip(std::span<const double> x, double clip_ratio) {
    if (!(clip_ratio > 0.0 && clip_ratio <= 1.0)) throw SynthError("hard_clip: clip_ratio must lie in (0, 1]");
    const double c = clip_ratio * max_abs(x);
    std::vector<double> out(x.begin(), x.end());
    if (c == 0.0) return out;
    for (auto& v : out) v = std::clamp(v, -c, c);
    return out;
}

std::vector<double> sigmoidal_distort(std::span<const double> x, const EchoPathConfig& cfg) {
    std::vector<double> out(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double b = 1.5 * x[n] - 0.3 * x[n] * x[n];
        const double a = b > 0.0 ? cfg.sigmoid_slope_pos : cfg.sigmoid_slope_neg;
        out[n] = 2.0 / (1.0 + std::exp(-a * b)) - 1.0;
    }
    double gain = 1.0;
    if (cfg.sigmoid_gain) {
        gain = *cfg.sigmoid_gain;
    } else {
        const double rms_out = std::sqrt(mean_square(out));
        if (rms_out > 0.0) gain = std::sqrt(mean_square(x)) / rms_out;
    }
    for (auto& v : out) v *= gain;
    return out;
}

std::vector<double> convolve_truncated(std::span<const double> x, std::span<const double> g) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        if (x[n] == 0.0) continue;
        const std::size_t kmax = std::min(g.size(), x.size() - n);
        const double xn = x[n];
        for (std::size_t k = 0; k < kmax; ++k) out[n + k] += xn * g[k];
    }
    return out;
}

std::vector<double> apply_echo_path(std::span<const double> x, const EchoPathConfig& cfg) {
    cfg.validate();
    if (!cfg.nonlinear) return convolve_truncated(x, cfg.rir.taps);
    const auto clipped = hard_clip(x, cfg.clip_ratio);
    const auto distorted = sigmoidal_distort(clipped, cfg);
    return convolve_truncated(distorted, cfg.rir.taps);
}

// ---------------------------------------------------------------------------
// Mixing

SerMeasurement measure_ser(std::span<const double> near, std::span<const double> echo, const TalkLabelSequence& labels) {
    if (near.size() != echo.size()) throw SynthError("measure_ser: length mismatch");
    auto mask = select_samples(labels, near.size(), TalkClass::DoubleTalk);
    SerMeasurement m;
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
        m.fallback = true;
        mask.assign(near.size(), true);
    }
    const double es = mean_square(near, &mask), ed = mean_square(echo, &mask);
    if (es <= 0.0 || ed <= 0.0) throw SynthError("measure_ser: zero energy in measurement region");
    m.ser_db = 10.0 * std::log10(es / ed);
    return m;
}

SerMix mix_at_ser(std::span<const double> near, std::span<const double> echo, double ser_db,
                  const TalkLabelSequence* labels_hint) {
    if (near.size() != echo.size()) throw SynthError("mix_at_ser: near-end and echo lengths differ");
    if (!std::isfinite(ser_db)) throw SynthError("mix_at_ser: SER must be finite");
    const TalkLabelSequence labels = labels_hint ? *labels_hint : label_frames(near, echo);
    const auto current = measure_ser(near, echo, labels);
    SerMix out;
    out.fallback = current.fallback;
    out.scale = std::pow(10.0, (current.ser_db - ser_db) / 20.0);
    out.scaled_echo.resize(echo.size());
    out.mixture.resize(echo.size());
    for (std::size_t n = 0; n < echo.size(); ++n) {
        out.scaled_echo[n] = out.scale * echo[n];
        out.mixture[n] = near[n] + out.scaled_echo[n];
    }
    return out;
}

std::vector<double> add_noise_at_snr(std::span<const double> y, std::span<const double> noise, double snr_db,
                                     std::span<const double> ref) {
    std::vector<double> out(y.begin(), y.end());
    if (snr_db == kNoiseDisabled) return out;
    if (noise.size() != y.size() || ref.size() != y.size()) throw SynthError("add_noise_at_snr: length mismatch");
    const double k = noise_gain(noise, snr_db, ref);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] += k * noise[n];
    return out;
}

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = rng.normal();
    return out;
}

std::vector<double> synthetic_speech(std::size_t n, std::size_t start, std::size_t end, std::uint64_t seed) {
    std::vector<double> out(n, 0.0);
    end = std::min(end, n);
    if (start >= end) return out;
    Rng rng(seed);
    const double fs = kSampleRate;
    const double base_f0 = rng.uniform(90.0, 240.0);
    const double two_pi = 2.0 * std::numbers::pi;
    std::size_t pos = start + static_cast<std::size_t>(rng.uniform(0.0, 0.02) * fs);
    while (pos < end) {
        const std::size_t dur = std::min<std::size_t>(static_cast<std::size_t>(rng.uniform(0.08, 0.25) * fs), end - pos);
        const bool voiced = rng.uniform() < 0.8;
        const double amp = rng.uniform(0.4, 1.0);
        const std::array<double, 3> formant{rng.uniform(300.0, 800.0), rng.uniform(900.0, 2200.0),
                                            rng.uniform(2300.0, 3200.0)};
        const double f0 = base_f0 * rng.uniform(0.85, 1.15);
        const double glide = rng.uniform(-0.15, 0.15);
        const double vib_phase = rng.uniform(0.0, two_pi);
        const std::size_t harmonics = static_cast<std::size_t>(3800.0 / f0);
        std::vector<double> weight(harmonics + 1, 0.0);
        double wsum = 0.0;
        for (std::size_t k = 1; k <= harmonics; ++k) {
            const double f = static_cast<double>(k) * f0;
            double w = 0.05;
            for (double F : formant) w += std::exp(-std::pow((f - F) / 150.0, 2.0));
            weight[k] = w / std::sqrt(static_cast<double>(k));
            wsum += weight[k];
        }
        double phase = 0.0, prev_noise = 0.0;
        for (std::size_t i = 0; i < dur; ++i) {
            const double t = static_cast<double>(i) / fs;
            const double env = 0.5 * (1.0 - std::cos(two_pi * static_cast<double>(i) / static_cast<double>(dur)));
            double s;
            if (voiced) {
                const double inst_f0 = f0 * (1.0 + glide * t / 0.25 + 0.03 * std::sin(two_pi * 5.0 * t + vib_phase));
                phase += two_pi * inst_f0 / fs;
                s = 0.0;
                for (std::size_t k = 1; k <= harmonics; ++k) s += weight[k] * std::sin(static_cast<double>(k) * phase);
                s /= wsum > 0.0 ? wsum : 1.0;
            } else {
                const double w = rng.normal();
                s = 0.3 * (w - prev_noise);
                prev_noise = w;
            }
            out[pos + i] = amp * env * s;
        }
        pos += dur + static_cast<std::size_t>(rng.uniform(0.01, 0.06) * fs);
    }
    const double peak = max_abs(out);
    if (peak > 0.0)
        for (auto& v : out) v *= 0.5 / peak;
    return out;
}

// ---------------------------------------------------------------------------
// Scenarios

MixtureScenario make_scenario(std::span<const double> far, std::span<const double> near, const EchoPathConfig& path,
                              const ScenarioSpec& spec, std::uint64_t noise_seed) {
    if (far.size() != near.size()) throw SynthError("make_scenario: far-end and near-end lengths differ");
    auto echo = apply_echo_path(far, path);
    auto labels = label_frames(near, echo, spec.labels);
    auto mix = mix_at_ser(near, echo, spec.ser_db, &labels);

    MixtureScenario sc;
    sc.labels = std::move(labels);
    sc.ser_db = spec.ser_db;
    sc.snr_db = spec.snr_db;
    sc.ser_fallback = mix.fallback;
    sc.nonlinear = path.nonlinear;
    std::vector<double> y = std::move(mix.mixture);
    std::vector<double> noise;
    if (spec.snr_db) {
        const auto raw = white_noise(near.size(), noise_seed);
        const double k = noise_gain(raw, *spec.snr_db, near);
        noise.resize(raw.size());
        for (std::size_t n = 0; n < raw.size(); ++n) noise[n] = k * raw[n];
        for (std::size_t n = 0; n < y.size(); ++n) y[n] += noise[n];
    }
    const double peak = max_abs(y);
    const double g = peak > spec.peak_limit ? spec.peak_limit / peak : 1.0;
    auto scaled = [g](std::span<const double> v) {
        Waveform w;
        w.samples.assign(v.begin(), v.end());
        for (auto& s : w.samples) s *= g;
        return w;
    };
    sc.far_end = scaled(far);
    sc.near_end = scaled(near);
    sc.echo = scaled(mix.scaled_echo);
    sc.mixture = scaled(y);
    if (spec.snr_db) sc.noise = scaled(noise);
    return sc;
}

std::vector<RoomSpec> default_rooms(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x524f4f4dULL));
    std::vector<RoomSpec> rooms;
    for (double t60 : {0.2, 0.4, 0.6, 0.8, 0.9, 1.0, 1.25}) {
        RoomSpec r;
        r.t60 = t60;
        r.geometry.dims = {rng.uniform(4.0, 8.0), rng.uniform(3.5, 6.0), rng.uniform(2.5, 3.5)};
        for (auto* p : {&r.geometry.source, &r.geometry.mic})
            for (std::size_t a = 0; a < 3; ++a) (*p)[a] = rng.uniform(0.5, r.geometry.dims[a] - 0.5);
        rooms.push_back(r);
    }
    return rooms;
}

namespace {

std::vector<double> place_corpus_segment(const std::vector<Waveform>& corpus, std::size_t n, std::size_t start,
                                         std::size_t end, Rng& rng) {
    std::vector<double> out(n, 0.0);
    const auto& src = corpus[rng.index(corpus.size())].samples;
    const std::size_t offset = rng.index(src.size());
    for (std::size_t i = start; i < std::min(end, n); ++i) out[i] = src[(offset + i - start) % src.size()];
    return out;
}

struct GeneratedRecord {
    MixtureScenario scenario;
    std::string split;
    std::size_t index = 0;
};

} // namespace

DatasetManifest build_dataset(const GenerationConfig& config, const fs::path& out_dir) {
    const auto rooms = config.rooms.empty() ? default_rooms(config.seed) : config.rooms;
    if (rooms.size() < 2) throw SynthError("build_dataset: need at least two rooms (training rooms + one test room)");
    if (config.train_ser_db.empty() || config.test_ser_db.empty()) throw SynthError("build_dataset: empty SER list");
    const auto n = static_cast<std::size_t>(std::lround(config.duration_s * kSampleRate));
    if (n < config.labels.frame_len) throw SynthError("build_dataset: duration shorter than one frame");

    std::vector<RoomImpulseResponse> rirs;
    for (const auto& r : rooms) rirs.push_back(simulate_rir(r.geometry, r.t60, config.rir_taps));

    std::vector<Waveform> corpus;
    if (config.corpus_dir) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(*config.corpus_dir))
            if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto w = read_wav(f);
            if (!w.empty()) corpus.push_back(std::move(w));
        }
        if (corpus.empty())
            throw SynthError("build_dataset: no usable 16 kHz WAV files in " + config.corpus_dir->string());
    }

    const std::size_t total = config.n_train + config.n_test;
    std::vector<GeneratedRecord> records(total);
    auto generate = [&](std::size_t i) {
        const bool is_train = i < config.n_train;
        Rng rng(mix_seed(config.seed, i));
        const std::size_t far_start = static_cast<std::size_t>(rng.uniform(0.0, 0.1) * n);
        const std::size_t far_end = static_cast<std::size_t>(rng.uniform(0.55, 0.7) * n);
        const std::size_t near_start = static_cast<std::size_t>(rng.uniform(0.35, 0.45) * n);
        const std::size_t near_end = static_cast<std::size_t>(rng.uniform(0.85, 1.0) * n);
        std::vector<double> far, near;
        if (corpus.empty()) {
            far = synthetic_speech(n, far_start, far_end, rng.engine()());
            near = synthetic_speech(n, near_start, near_end, rng.engine()());
        } else {
            far = place_corpus_segment(corpus, n, far_start, far_end, rng);
            near = place_corpus_segment(corpus, n, near_start, near_end, rng);
        }
        const std::size_t rir_id = is_train ? rng.index(rirs.size() - 1) : rirs.size() - 1;
        EchoPathConfig path;
        path.rir = rirs[rir_id];
        path.nonlinear = config.nonlinear;
        path.clip_ratio = config.clip_ratio;
        path.sigmoid_gain = config.sigmoid_gain;

        ScenarioSpec spec;
        spec.ser_db = is_train ? config.train_ser_db[rng.index(config.train_ser_db.size())]
                               : config.test_ser_db[(i - config.n_train) % config.test_ser_db.size()];
        spec.snr_db = config.snr_db;
        spec.n_samples = n;
        spec.labels = config.labels;
        auto sc = make_scenario(far, near, path, spec, rng.engine()());
        sc.rir_id = static_cast<int>(rir_id);
        records[i] = GeneratedRecord{std::move(sc), is_train ? "train" : "test", i};
    };

    parallel_for(total, config.jobs, generate);

    DatasetManifest manifest;
    for (const auto& rec : records) {
        char stem[64];
        std::snprintf(stem, sizeof stem, "rec%05zu", rec.index);
        const fs::path dir = out_dir / rec.split;
        ManifestRecord m;
        m.mixture_path = dir / (std::string(stem) + "_mix.wav");
        m.far_end_path = dir / (std::string(stem) + "_far.wav");
        m.near_end_path = dir / (std::string(stem) + "_near.wav");
        m.echo_path = dir / (std::string(stem) + "_echo.wav");
        m.label_path = dir / (std::string(stem) + "_labels.bin");
        const auto& sc = rec.scenario;
        write_wav(m.mixture_path, sc.mixture);
        write_wav(m.far_end_path, sc.far_end);
        write_wav(m.near_end_path, sc.near_end);
        write_wav(m.echo_path, sc.echo);
        write_labels(m.label_path, sc.labels.labels);
        m.ser_db = sc.ser_db;
        m.snr_db = sc.snr_db;
        m.rir_id = sc.rir_id;
        m.nonlinear = sc.nonlinear;
        m.split = rec.split;
        m.frame_len = sc.labels.frame_len;
        m.hop = sc.labels.hop;
        manifest.records.push_back(std::move(m));
    }
    write_manifest(out_dir / "manifest.tsv", manifest);
    return manifest;
}

} // namespace tdaec
