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

#include "tdaec/metrics.hpp"

#include "tdaec/fft.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace tdaec {

namespace {

void check_lengths(std::size_t a, std::size_t b, const std::vector<bool>& mask, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": signal lengths differ");
    if (!mask.empty() && mask.size() != a) throw std::invalid_argument(std::string(what) + ": mask length differs");
}

} // namespace

std::optional<double> erle_db(std::span<const double> y, std::span<const double> s_hat, const std::vector<bool>& mask) {
    check_lengths(y.size(), s_hat.size(), mask, "erle");
    double ey = 0.0, es = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        ey += y[i] * y[i];
        es += s_hat[i] * s_hat[i];
        ++n;
    }
    if (n == 0) return std::nullopt;
    const double inv = 1.0 / static_cast<double>(n);
    return 10.0 * std::log10((ey * inv) / std::max(es * inv, kErleEnergyFloor));
}

std::optional<double> erle(std::span<const double> y, std::span<const double> s_hat, const TalkLabelSequence& labels) {
    return erle_db(y, s_hat, select_samples(labels, y.size(), TalkClass::FarOnly));
}

std::optional<double> si_snr_db(std::span<const double> s, std::span<const double> s_hat, const std::vector<bool>& mask) {
    check_lengths(s.size(), s_hat.size(), mask, "si_snr");
    double ss = 0.0, sh = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        ss += s[i] * s[i];
        sh += s[i] * s_hat[i];
        ++n;
    }
    if (n == 0) return std::nullopt;
    if (ss <= 0.0) throw std::invalid_argument("si_snr: zero-energy target");
    const double alpha = sh / ss;
    double target = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        const double t = alpha * s[i];
        target += t * t;
        noise += (s_hat[i] - t) * (s_hat[i] - t);
    }
    if (noise <= 0.0) return target > 0.0 ? kSiSnrCapDb : -kSiSnrCapDb;
    if (target <= 0.0) return -kSiSnrCapDb;
    return std::clamp(10.0 * std::log10(target / noise), -kSiSnrCapDb, kSiSnrCapDb);
}

std::optional<double> si_snr(std::span<const double> s, std::span<const double> s_hat, const TalkLabelSequence& labels) {
    return si_snr_db(s, s_hat, select_samples(labels, s.size(), TalkClass::DoubleTalk));
}

DtdResult dtd_accuracy(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("dtd_accuracy: frame counts differ");
    DtdResult r;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] >= kTalkClassCount || truth[i] >= kTalkClassCount)
            throw std::invalid_argument("dtd_accuracy: class index out of range");
        ++r.confusion[truth[i]][predicted[i]];
        hits += predicted[i] == truth[i];
    }
    r.accuracy = truth.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
    return r;
}

GrayImage spectrogram(std::span<const double> w, std::size_t fft_size, std::size_t hop) {
    if (w.size() < fft_size) throw std::invalid_argument("spectrogram: signal shorter than the analysis window");
    const std::size_t frames = (w.size() - fft_size) / hop + 1;
    const std::size_t bins = fft_size / 2 + 1;
    RealFft fft(fft_size);
    std::vector<double> window(fft_size), buf(fft_size);
    for (std::size_t i = 0; i < fft_size; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(fft_size));
    std::vector<std::complex<double>> spec(bins);
    std::vector<double> mag(frames * bins);
    double peak = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t i = 0; i < fft_size; ++i) buf[i] = w[f * hop + i] * window[i];
        fft.forward(buf, spec);
        for (std::size_t k = 0; k < bins; ++k) {
            mag[f * bins + k] = std::abs(spec[k]);
            peak = std::max(peak, mag[f * bins + k]);
        }
    }
    GrayImage img{frames, bins, std::vector<std::uint8_t>(frames * bins, 0)};
    if (peak <= 0.0) return img;
    const double hi = 20.0 * std::log10(peak), lo = hi - 80.0;
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t k = 0; k < bins; ++k) {
            const double m = mag[f * bins + k];
            const double db = m > 0.0 ? 20.0 * std::log10(m) : lo;
            const double v = std::clamp((db - lo) / (hi - lo), 0.0, 1.0);
            img.pixels[(bins - 1 - k) * frames + f] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::ostringstream header;
    header << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    const std::string h = header.str();
    std::vector<std::uint8_t> bytes(h.begin(), h.end());
    bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
    write_file_bytes(path, bytes);
}

GrayImage read_pgm(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    std::size_t pos = 0;
    auto token = [&] {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
        return t;
    };
    if (token() != "P5") throw AudioIoError(path.string() + ": not a binary PGM");
    GrayImage img;
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (token() != "255") throw AudioIoError(path.string() + ": unsupported maxval");
    ++pos;
    if (bytes.size() - pos != img.width * img.height) throw AudioIoError(path.string() + ": truncated PGM");
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
    return img;
}

void spectrogram_image(std::span<const double> w, const std::filesystem::path& out_path) {
    write_pgm(out_path, spectrogram(w));
}

} // namespace tdaec
