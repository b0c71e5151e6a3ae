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

#include "tdaec/evaluate.hpp"
#include "tdaec/metrics.hpp"
#include "tdaec/random.hpp"

#include "scenarios.hpp"
#include "test_util.hpp"

#include <sstream>

using namespace tdaec;
using namespace tdaec::testing;

TEST(Erle, Examples) {
    const auto y = random_vector(1000, 1);
    std::vector<double> tenth(y);
    for (auto& v : tenth) v *= 0.1;
    EXPECT_EQ(*erle_db(y, y), 0.0);
    EXPECT_NEAR(*erle_db(y, tenth), 20.0, 1e-9);
}

TEST(Erle, FloorAndMask) {
    const std::vector<double> y(100, 1.0), zero(100, 0.0);
    EXPECT_NEAR(*erle_db(y, zero), 120.0, 1e-9);
    std::vector<bool> none(100, false);
    EXPECT_FALSE(erle_db(y, y, none).has_value());
    std::vector<bool> half(100, false);
    std::vector<double> s(100, 1.0);
    for (std::size_t i = 0; i < 50; ++i) {
        half[i] = true;
        s[i] = 0.01;
    }
    EXPECT_NEAR(*erle_db(y, s, half), 40.0, 1e-9);
}

TEST(Erle, UsesFarOnlySamples) {
    TalkLabelSequence l{{2, 2, 3, 3, 1}, 160, 80};
    const std::size_t n = 480;
    const std::vector<double> y(n, 1.0);
    std::vector<double> s(n, 1.0);
    for (std::size_t i = 0; i < 160; ++i) s[i] = 0.1; // FarOnly region
    EXPECT_NEAR(*erle(y, s, l), 20.0, 1e-9);
    TalkLabelSequence near_only{{1, 1, 1, 1, 1}, 160, 80};
    EXPECT_FALSE(erle(y, s, near_only).has_value());
}

TEST(Erle, JointScaleInvariant) {
    const auto y = random_vector(800, 2);
    const auto s = random_vector(800, 3, -0.2, 0.2);
    std::vector<double> y2(y), s2(s);
    for (auto& v : y2) v *= 13.0;
    for (auto& v : s2) v *= 13.0;
    EXPECT_NEAR(*erle_db(y, s), *erle_db(y2, s2), 1e-9);
}

TEST(SiSnr, CapScaleAndOrthogonal) {
    const auto s = random_vector(2000, 4);
    std::vector<double> twice(s);
    for (auto& v : twice) v *= 2.0;
    EXPECT_EQ(*si_snr_db(s, s), kSiSnrCapDb);
    EXPECT_EQ(*si_snr_db(s, twice), kSiSnrCapDb);

    // Gram-Schmidt: remove the s component from random noise.
    auto o = random_vector(2000, 5);
    double so = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        so += s[i] * o[i];
        ss += s[i] * s[i];
    }
    for (std::size_t i = 0; i < s.size(); ++i) o[i] -= so / ss * s[i];
    EXPECT_LE(*si_snr_db(s, o), -30.0);
}

TEST(SiSnr, MatchesDirectFormulaAndScaleInvariance) {
    const auto s = random_vector(1500, 6);
    const auto noise = random_vector(1500, 7, -0.3, 0.3);
    std::vector<double> est(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) est[i] = 0.8 * s[i] + noise[i];
    double sh = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        sh += s[i] * est[i];
        ss += s[i] * s[i];
    }
    double pt = 0.0, pn = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double t = sh / ss * s[i];
        pt += t * t;
        pn += (est[i] - t) * (est[i] - t);
    }
    EXPECT_NEAR(*si_snr_db(s, est), 10.0 * std::log10(pt / pn), 1e-9);
    std::vector<double> scaled(est);
    for (auto& v : scaled) v *= -3.0;
    EXPECT_NEAR(*si_snr_db(s, scaled), *si_snr_db(s, est), 1e-9);
}

TEST(SiSnr, ZeroTargetThrows) {
    const std::vector<double> z(100, 0.0);
    EXPECT_THROW(si_snr_db(z, random_vector(100, 1)), std::invalid_argument);
}

TEST(Dtd, Examples) {
    const std::vector<std::uint8_t> truth{0, 1, 2, 3, 3, 2};
    EXPECT_EQ(dtd_accuracy(truth, truth).accuracy, 1.0);
    const std::vector<std::uint8_t> two{0, 1, 1, 0};
    const std::vector<std::uint8_t> comp{1, 0, 0, 1};
    const auto r = dtd_accuracy(comp, two);
    EXPECT_EQ(r.accuracy, 0.0);
    EXPECT_EQ(r.confusion[0][1], 2u);
    EXPECT_EQ(r.confusion[1][0], 2u);
}

TEST(Dtd, UniformRandomNearQuarter) {
    Rng rng(17);
    std::vector<std::uint8_t> truth(10000), pred(10000);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = static_cast<std::uint8_t>(i % 4);
        pred[i] = static_cast<std::uint8_t>(std::min(3.0, std::floor(4.0 * rng.uniform())));
    }
    const auto r = dtd_accuracy(pred, truth);
    EXPECT_NEAR(r.accuracy, 0.25, 0.05);
    std::size_t total = 0;
    for (const auto& row : r.confusion)
        for (auto c : row) total += c;
    EXPECT_EQ(total, 10000u);
}

TEST(Dtd, Errors) {
    const std::vector<std::uint8_t> a{0, 1}, b{0}, bad{0, 4};
    EXPECT_THROW(dtd_accuracy(a, b), std::invalid_argument);
    EXPECT_THROW(dtd_accuracy(bad, a), std::invalid_argument);
}

TEST(Spectrogram, ToneRowAndDims) {
    const std::size_t n = 16000;
    std::vector<double> tone(n);
    for (std::size_t i = 0; i < n; ++i) tone[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * static_cast<double>(i) / 16000.0);
    const auto img = spectrogram(tone);
    EXPECT_EQ(img.height, 257u);
    EXPECT_EQ(img.width, (n - 512) / 160 + 1);
    // 1 kHz sits on bin 1000 / (16000 / 512) = 32; row 0 is the top (bin 256).
    const std::size_t expected_row = 256 - 32;
    for (std::size_t col = 0; col < img.width; ++col) {
        std::size_t best = 0;
        for (std::size_t row = 0; row < img.height; ++row)
            if (img.pixels[row * img.width + col] > img.pixels[best * img.width + col]) best = row;
        EXPECT_EQ(best, expected_row) << "column " << col;
    }
}

TEST(Spectrogram, SilenceIsUniform) {
    const std::vector<double> z(4000, 0.0);
    const auto img = spectrogram(z);
    for (auto p : img.pixels) EXPECT_EQ(p, img.pixels[0]);
    EXPECT_THROW(spectrogram(std::vector<double>(100, 0.0)), std::invalid_argument);
}

TEST(Spectrogram, PgmRoundTrip) {
    TempDir dir;
    const auto img = spectrogram(random_vector(3000, 9));
    spectrogram_image(random_vector(3000, 9), dir / "s.pgm");
    const auto back = read_pgm(dir / "s.pgm");
    EXPECT_EQ(back.width, img.width);
    EXPECT_EQ(back.height, img.height);
    EXPECT_EQ(back.pixels, img.pixels);
}

namespace {

// Far-end single talk for the first 10000 samples, then double talk, through a
// short linear path.
EvalItem linear_item(std::uint64_t seed, double ser) {
    const std::size_t n = 32000;
    const auto lin = linear_echo(seed, n, 64);
    const auto near = synthetic_speech(n, 20000, 32000, mix_seed(seed, 9));
    EchoPathConfig path;
    path.rir.taps = lin.path;
    ScenarioSpec spec;
    spec.ser_db = ser;
    spec.n_samples = n;
    const auto sc = make_scenario(lin.far, near, path, spec, seed);
    return EvalItem{sc.mixture.samples, sc.far_end.samples, sc.near_end.samples, sc.labels, ser};
}

} // namespace

TEST(Evaluate, OracleAndIdentity) {
    std::vector<EvalItem> items;
    for (double ser : {0.0, 3.5, 7.0}) items.push_back(linear_item(static_cast<std::uint64_t>(ser * 2 + 1), ser));
    const auto oracle = evaluate(items, oracle_canceller());
    ASSERT_EQ(oracle.levels.size(), 3u);
    for (const auto& lv : oracle.levels) {
        EXPECT_EQ(lv.records, 1u);
        EXPECT_EQ(*lv.si_snr_db, kSiSnrCapDb);
        EXPECT_EQ(*lv.dtd_accuracy, 1.0);
        EXPECT_GT(*lv.erle_db, 40.0); // near-end leaks only into frames under its -40 dB threshold
    }
    EXPECT_EQ(oracle.overall.records, 3u);
    const auto ident = evaluate(items, identity_canceller());
    for (const auto& lv : ident.levels) {
        EXPECT_EQ(*lv.erle_db, 0.0);
        EXPECT_FALSE(lv.dtd_accuracy.has_value());
    }
    const auto text = format_report(ident);
    EXPECT_EQ(text.rfind("metric\tser_db\tvalue\n", 0), 0u);
    EXPECT_NE(text.find("dtd_accuracy\t3.5\tabsent"), std::string::npos);
    EXPECT_NE(text.find("erle_db\tall\t0"), std::string::npos);
}

TEST(Evaluate, NlmsLinearScenariosPerLevel) {
    std::vector<EvalItem> items;
    for (double ser : {0.0, 3.5, 7.0})
        for (std::uint64_t r = 0; r < 2; ++r) items.push_back(linear_item(mix_seed(r, static_cast<std::uint64_t>(ser * 10)), ser));
    const auto report = evaluate(items, nlms_canceller(NlmsConfig{64, 0.5, 1e-6}), 2);
    for (const auto& lv : report.levels) {
        ASSERT_TRUE(lv.erle_db.has_value());
        EXPECT_GE(*lv.erle_db, 25.0) << lv.ser;
    }
    // Deterministic across job counts.
    EXPECT_EQ(format_report(report), format_report(evaluate(items, nlms_canceller(NlmsConfig{64, 0.5, 1e-6}), 1)));
}

TEST(Evaluate, ManifestRoundTrip) {
    TempDir dir;
    GenerationConfig cfg;
    cfg.n_train = 1;
    cfg.n_test = 3;
    cfg.rir_taps = 512;
    cfg.duration_s = 0.5;
    const auto manifest = build_dataset(cfg, dir / "d");
    const auto report = evaluate_manifest(read_manifest(dir / "d" / "manifest.tsv"), "test", oracle_canceller());
    EXPECT_EQ(report.overall.records, 3u);
    write_report(dir / "r.tsv", report);
    const auto bytes = read_file_bytes(dir / "r.tsv");
    EXPECT_EQ(std::string(bytes.begin(), bytes.end()), format_report(report));
}
