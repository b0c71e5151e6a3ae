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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "tdaec/baselines.hpp"
#include "tdaec/checkpoint.hpp"
#include "tdaec/gradcheck.hpp"
#include "tdaec/metrics.hpp"
#include "tdaec/model.hpp"
#include "tdaec/optim.hpp"
#include "tdaec/training.hpp"

#include "scenarios.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

using namespace tdaec;
using namespace tdaec::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 3) {
    std::ostringstream s;
    s << std::setprecision(prec) << v;
    return s.str();
}

Tensor rand_tensor(Shape shape, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return Tensor::from(std::move(shape), std::move(v));
}

// Copy of x with every row after t replaced by fresh noise.
Tensor perturb_after(const Tensor& x, std::size_t t, std::uint64_t seed) {
    std::vector<double> v(x.data().begin(), x.data().end());
    const std::size_t cols = x.dim(1);
    Rng rng(seed);
    for (std::size_t i = (t + 1) * cols; i < v.size(); ++i) v[i] += rng.uniform(-2.0, 2.0);
    return Tensor::from(x.shape(), std::move(v));
}

double rows_diff(const Tensor& a, const Tensor& b, std::size_t upto) {
    double m = 0.0;
    const std::size_t cols = a.dim(1);
    for (std::size_t i = 0; i < (upto + 1) * cols; ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

Outcome gradient_oracle() {
    const auto results = run_gradient_suite(7);
    double worst = 0.0;
    std::string worst_name;
    bool ok = !results.empty();
    for (const auto& r : results) {
        if (r.points < 3 || !(r.max_rel_error < kGradCheckTolerance)) ok = false;
        if (r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            worst_name = r.name;
        }
    }
    return {ok, std::to_string(results.size()) + " checks incl. end_to_end, worst " + worst_name + " " + fmt(worst)};
}

Outcome causality() {
    NoGradGuard ng;
    const std::size_t T = 250, D = 16, t = 120;
    double worst = 0.0;
    const auto x = rand_tensor({T, D}, 1);
    const auto xp = perturb_after(x, t, 2);

    const auto gain = rand_tensor({D}, 3), bias = rand_tensor({D}, 4);
    worst = std::max(worst, rows_diff(layer_norm_cumulative(x, gain, bias), layer_norm_cumulative(xp, gain, bias), t));

    const auto q = rand_tensor({T, D}, 5);
    const auto qp = perturb_after(q, t, 6);
    worst = std::max(worst, rows_diff(local_attention(q, x, 100), local_attention(qp, xp, 100), t));

    LstmWeights l1{rand_tensor({4 * D, D}, 7), rand_tensor({4 * D, D}, 8), rand_tensor({4 * D}, 9)};
    LstmWeights l2{rand_tensor({4 * D, D}, 10), rand_tensor({4 * D, D}, 11), rand_tensor({4 * D}, 12)};
    worst = std::max(worst, rows_diff(lstm_layer(lstm_layer(x, l1), l2), lstm_layer(lstm_layer(xp, l1), l2), t));

    const auto cfg = ModelConfig::toy();
    const auto params = AecModelParams::init(cfg, 13);
    const auto sc = toy_scenario(2);
    const std::size_t frame = 80;
    const std::size_t cut = frame * cfg.hop + cfg.L; // first sample not read by frames 0..frame
    auto mix = sc.mixture.samples;
    auto far = sc.far_end.samples;
    Rng rng(14);
    for (std::size_t i = cut; i < mix.size(); ++i) {
        mix[i] += rng.uniform(-0.5, 0.5);
        far[i] += rng.uniform(-0.5, 0.5);
    }
    const auto a = forward(sc.mixture.samples, sc.far_end.samples, params, cfg);
    const auto b = forward(mix, far, params, cfg);
    worst = std::max(worst, rows_diff(a.class_probs, b.class_probs, frame));
    worst = std::max(worst, rows_diff(a.mask, b.mask, frame));
    // Output samples built only from frames 0..frame.
    for (std::size_t n = 0; n < (frame + 1) * cfg.hop; ++n) worst = std::max(worst, std::abs(a.s_hat(n) - b.s_hat(n)));
    return {worst <= 1e-9, "cLN, attention W=100, 2-layer LSTM, full forward: max change " + fmt(worst)};
}

Outcome overfit() {
    const auto sc = toy_scenario(1);
    const TrainingExample ex{sc.mixture.samples, sc.far_end.samples, sc.near_end.samples, sc.labels.labels};
    TrainConfig tc;
    tc.alpha = 0.001;
    tc.lr_start = tc.lr_end = 1e-2;
    tc.epochs = 500;
    tc.patience = tc.epochs;
    tc.seed = 1;
    auto session = start_session(ModelConfig::toy(), tc, 1);
    double first = 0.0;
    {
        NoGradGuard ng;
        first = example_loss(ex, session.params, session.model, tc.alpha).total.item();
    }
    train(session, {ex}, {ex});
    NoGradGuard ng;
    const auto out = forward(ex.mixture, ex.far_end, session.params, session.model);
    const double last = multitask_loss(out.s_hat, ex.near_end, out.class_probs, ex.labels, tc.alpha).total.item();
    const auto pred = argmax_rows(out.class_probs);
    const double acc = dtd_accuracy(pred, ex.labels).accuracy;
    const double ratio = last / first;
    return {ratio < 0.1 && acc >= 0.9, std::to_string(session.state.history.size()) + " steps, loss " + fmt(first, 4) +
                                           " -> " + fmt(last, 4) + " (ratio " + fmt(ratio) + "), frame accuracy " +
                                           fmt(acc, 4)};
}

Outcome baselines() {
    std::vector<bool> last(5 * 16000, false);
    for (std::size_t i = 4 * 16000; i < last.size(); ++i) last[i] = true;

    const auto clean = linear_echo(1, 5 * 16000, 64);
    const auto n = nlms_cancel(clean.far, clean.mic, NlmsConfig{64, 0.5, 1e-6});
    const double erle_nlms = *erle_db(clean.mic, n.residual.samples, last);

    // Equivalence: one partition with block == filter length, 30 dB
    // measurement noise so both steady states are finite.
    const auto noisy = linear_echo(1, 5 * 16000, 64, -30.0);
    const auto ne = nlms_cancel(noisy.far, noisy.mic, NlmsConfig{64, 0.2, 1e-6});
    const auto fe = fdaf_cancel(noisy.far, noisy.mic, FdafConfig{64, 1, 0.2, 1e-6, 0.9});
    const double en = *erle_db(noisy.mic, ne.residual.samples, last);
    const double ef = *erle_db(noisy.mic, fe.residual.samples, last);
    const double gap = std::abs(en - ef);
    return {erle_nlms >= 25.0 && gap <= 0.5, "NLMS final-second ERLE " + fmt(erle_nlms, 4) + " dB; equivalence NLMS " +
                                                 fmt(en, 4) + " dB vs FDAF " + fmt(ef, 4) + " dB (gap " + fmt(gap) + ")"};
}

Outcome arithmetic() {
    const auto y = white_noise(1000, 3);
    std::vector<double> tenth(y);
    for (auto& v : tenth) v *= 0.1;
    const double e0 = *erle_db(y, y), e20 = *erle_db(y, tenth);
    const double mix = combine_loss(2.0, 4.0, 0.001);
    const double lr0 = lr_at(0.0, 1e-4, 1e-8, 200), lr1 = lr_at(199.0, 1e-4, 1e-8, 200);
    const bool ok = e0 == 0.0 && std::abs(e20 - 20.0) <= 1e-9 && std::abs(mix - 2.002) <= 1e-12 && lr0 == 1e-4 &&
                    lr1 == 1e-8;
    std::ostringstream d;
    d << std::setprecision(17) << "ERLE(y,y)=" << e0 << " ERLE(y,0.1y)=" << e20 << " loss=" << mix << " lr "
      << lr0 << " .. " << lr1;
    return {ok, d.str()};
}

Outcome synthesis() {
    const std::size_t n = 16000;
    const auto far = synthetic_speech(n, 800, 12000, 31);
    const auto near = synthetic_speech(n, 5000, 16000, 32);
    EchoPathConfig path;
    path.rir = simulate_rir(RoomGeometry{}, 0.5, 2048);
    const auto echo = apply_echo_path(far, path);
    double ser_err = 0.0;
    for (double ser : {0.0, 3.5, 7.0}) {
        const auto m = mix_at_ser(near, echo, ser);
        const auto labels = label_frames(near, echo);
        const auto dt = select_samples(labels, n, TalkClass::DoubleTalk);
        double en = 0.0, ee = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (dt[i]) {
                en += near[i] * near[i];
                ee += m.scaled_echo[i] * m.scaled_echo[i];
            }
        ser_err = std::max(ser_err, std::abs(10.0 * std::log10(en / ee) - ser));
    }

    const auto x1 = white_noise(6000, 41), x2 = white_noise(6000, 42);
    std::vector<double> combo(6000);
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = 0.7 * x1[i] - 1.3 * x2[i];
    const auto y1 = apply_echo_path(x1, path), y2 = apply_echo_path(x2, path), yc = apply_echo_path(combo, path);
    double sup = 0.0;
    for (std::size_t i = 0; i < yc.size(); ++i) sup = std::max(sup, std::abs(yc[i] - (0.7 * y1[i] - 1.3 * y2[i])));

    // Block signals with known activity: a frame is active iff it overlaps a block.
    const std::vector<std::pair<std::size_t, std::size_t>> nb{{1000, 3000}, {5000, 6500}}, eb{{2000, 4000}, {6000, 7700}};
    auto blocks = [](const auto& ranges) {
        std::vector<double> x(8000, 0.0);
        for (auto [b, e] : ranges)
            for (std::size_t i = b; i < e; ++i) x[i] = 0.5;
        return x;
    };
    auto overlaps = [](std::size_t f, const auto& ranges) {
        for (auto [b, e] : ranges)
            if (b < f * 80 + 160 && f * 80 < e) return true;
        return false;
    };
    const auto labels = label_frames(blocks(nb), blocks(eb));
    std::size_t mismatches = 0;
    for (std::size_t f = 0; f < labels.labels.size(); ++f)
        mismatches += labels.labels[f] != (overlaps(f, nb) ? 1 : 0) + (overlaps(f, eb) ? 2 : 0);
    return {ser_err <= 0.01 && sup <= 1e-9 && mismatches == 0 && labels.labels.size() == label_count(8000, 160, 80),
            "SER re-measure err " + fmt(ser_err) + " dB, superposition " + fmt(sup) + ", label mismatches " +
                std::to_string(mismatches) + "/" + std::to_string(labels.labels.size())};
}

Outcome round_trips() {
    const auto dir = std::filesystem::temp_directory_path() / "tdaec_acceptance";
    std::filesystem::create_directories(dir);
    Waveform w;
    Rng rng(5);
    for (int i = 0; i < 20000; ++i) w.samples.push_back(std::floor(rng.uniform(-32768.0, 32767.0)) / 32768.0);
    w.samples.push_back(-1.0);
    w.samples.push_back(32767.0 / 32768.0);
    write_wav(dir / "a.wav", w);
    const auto back = read_wav(dir / "a.wav");
    write_wav(dir / "b.wav", back);
    const bool wav_ok = back.samples == w.samples && read_file_bytes(dir / "a.wav") == read_file_bytes(dir / "b.wav");

    Checkpoint ck{ModelConfig::toy(), AecModelParams::init(ModelConfig::toy(), 6), std::nullopt};
    save_checkpoint(dir / "m.ckpt", ck);
    const auto loaded = load_checkpoint(dir / "m.ckpt");
    bool ck_ok = encode_checkpoint(loaded) == read_file_bytes(dir / "m.ckpt");
    const auto a = ck.params.tensors(), b = loaded.params.tensors();
    for (std::size_t i = 0; i < a.size(); ++i)
        ck_ok = ck_ok && a[i].numel() == b[i].numel() &&
                std::memcmp(a[i].data().data(), b[i].data().data(), a[i].numel() * sizeof(double)) == 0;
    std::filesystem::remove_all(dir);
    return {wav_ok && ck_ok, std::string("WAV payload ") + (wav_ok ? "bit-exact" : "differs") + ", checkpoint " +
                                 (ck_ok ? "bit-exact" : "differs")};
}

Outcome resigmoid_check() {
    std::vector<double> xs;
    for (int i = -2000; i <= 2000; ++i) xs.push_back(i * 0.005);
    const auto y = resigmoid(Tensor::from({xs.size()}, xs));
    bool ok = true;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (y(i) < 0.0) ok = false;
        if (xs[i] <= 0.0 && y(i) != 0.0) ok = false;
    }
    const double at1 = resigmoid(Tensor::from({1}, {1.0}))(0);
    ok = ok && std::abs(at1 - 0.7310586) <= 1e-6;
    std::ostringstream d;
    d << std::setprecision(10) << "non-negative, zero for x<=0 on [-10, 10]; f(1)=" << at1;
    return {ok, d.str()};
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"gradient-oracle", 120.0, gradient_oracle}, {"causality", 0.0, causality},
        {"overfit", 300.0, overfit},                 {"baselines", 60.0, baselines},
        {"arithmetic", 0.0, arithmetic},             {"synthesis", 0.0, synthesis},
        {"round-trips", 0.0, round_trips},           {"resigmoid", 0.0, resigmoid_check},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0.0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += "; over the " + fmt(c.budget_s) + " s budget";
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << (i + 1) << ' ' << c.name << ": " << o.detail << " ("
                  << std::fixed << std::setprecision(2) << secs << " s)" << std::defaultfloat << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
