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
#include "tdaec/checkpoint.hpp"
#include "tdaec/cli.hpp"
#include "tdaec/metrics.hpp"

#include "test_util.hpp"

#include <fstream>
#include <sstream>

using namespace tdaec;
using namespace tdaec::testing;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string text_of(const std::filesystem::path& p) {
    const auto b = read_file_bytes(p);
    return {b.begin(), b.end()};
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

constexpr const char* kSmallConfig = R"({
    "seed": 4,
    "generation": {"n_train": 2, "n_test": 3, "duration_s": 0.3, "rir_taps": 256},
    "model": {"N": 16, "B": 8, "H": 8, "window": 4},
    "train": {"epochs": 2, "lr_start": 1e-3, "lr_end": 1e-4}
})";

} // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(invoke({}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"synth"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"synth", "--out", "x", "--bogus"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"baseline", "--algo", "rls", "--mix", "a", "--far", "b", "--out", "c"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"train", "--data", "/nonexistent/manifest.tsv", "--out", "o"}).code, cli::kExitUsage);
    EXPECT_EQ(invoke({"--help"}).code, cli::kExitOk);
}

TEST(Cli, GradCheckPasses) {
    const auto r = invoke({"grad-check", "--seed", "3"});
    EXPECT_EQ(r.code, cli::kExitOk) << r.out << r.err;
    EXPECT_NE(r.out.find("end_to_end"), std::string::npos);
    EXPECT_NE(r.out.find("local_attention"), std::string::npos);
}

TEST(Cli, EndToEndPipeline) {
    TempDir dir;
    write_text(dir / "cfg.json", kSmallConfig);
    const std::string cfg = (dir / "cfg.json").string();
    const std::string data = (dir / "data").string();

    auto r = invoke({"synth", "--config", cfg, "--out", data});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest_path = dir / "data" / "manifest.tsv";
    const auto manifest = read_manifest(manifest_path);
    ASSERT_EQ(manifest.records.size(), 5u);

    r = invoke({"train", "--config", cfg, "--data", manifest_path.string(), "--out", (dir / "run").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / "best.ckpt"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / "last.ckpt"));
    std::istringstream hist(text_of(dir / "run" / "history.tsv"));
    std::string line;
    int lines = 0;
    while (std::getline(hist, line)) {
        std::istringstream fields(line);
        std::size_t epoch;
        double tl, vl;
        ASSERT_TRUE(fields >> epoch >> tl >> vl) << line;
        EXPECT_EQ(epoch, static_cast<std::size_t>(lines));
        ++lines;
    }
    EXPECT_EQ(lines, 2);

    const auto test_rec = records_in_split(manifest, "test").front();
    const auto ckpt = (dir / "run" / "best.ckpt").string();
    r = invoke({"cancel", "--model", ckpt, "--mix", test_rec.mixture_path.string(), "--far", test_rec.far_end_path.string(),
             "--out", (dir / "est.wav").string(), "--labels-out", (dir / "est.lab").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto est = read_wav(dir / "est.wav");
    EXPECT_EQ(est.size(), read_wav(test_rec.mixture_path).size());
    EXPECT_EQ(read_labels(dir / "est.lab").size(), read_labels(test_rec.label_path).size());

    r = invoke({"eval", "--data", manifest_path.string(), "--model", ckpt, "--out", (dir / "model.tsv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = text_of(dir / "model.tsv");
    EXPECT_EQ(report.rfind("metric\tser_db\tvalue\n", 0), 0u);
    for (const char* key : {"erle_db\t0\t", "erle_db\t3.5\t", "erle_db\t7\t", "dtd_accuracy\tall\t", "confusion\t"})
        EXPECT_NE(report.find(key), std::string::npos) << key;

    r = invoke({"eval", "--data", manifest_path.string(), "--algo", "oracle"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("si_snr_db\tall\t60"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("dtd_accuracy\tall\t1"), std::string::npos) << r.out;

    r = invoke({"eval", "--data", manifest_path.string()});
    EXPECT_EQ(r.code, cli::kExitUsage);

    for (const char* algo : {"nlms", "fdaf"}) {
        const auto out = dir / (std::string(algo) + ".wav");
        r = invoke({"baseline", "--algo", algo, "--mix", test_rec.mixture_path.string(), "--far",
                 test_rec.far_end_path.string(), "--out", out.string(), "--taps", "128", "--block", "64",
                 "--partitions", "2"});
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_EQ(read_wav(out).size(), est.size());
    }

    r = invoke({"spectrogram", "--in", test_rec.mixture_path.string(), "--out", (dir / "mix.pgm").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto img = read_pgm(dir / "mix.pgm");
    EXPECT_EQ(img.height, 257u);
    EXPECT_EQ(img.width, (est.size() - 512) / 160 + 1);
}

TEST(Cli, RuntimeErrorsExitOne) {
    TempDir dir;
    write_text(dir / "bad.ckpt", "not a checkpoint");
    Waveform w{std::vector<double>(1600, 0.1)};
    write_wav(dir / "a.wav", w);
    auto r = invoke({"cancel", "--model", (dir / "bad.ckpt").string(), "--mix", (dir / "a.wav").string(), "--far",
                  (dir / "a.wav").string(), "--out", (dir / "o.wav").string()});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_FALSE(r.err.empty());

    write_text(dir / "cfg.json", R"({"model": {"typo": 1}})");
    r = invoke({"synth", "--config", (dir / "cfg.json").string(), "--out", (dir / "d").string()});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.err.find("typo"), std::string::npos);
}
