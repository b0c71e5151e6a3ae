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

#include "tdaec/training.hpp"

#include "tdaec/checkpoint.hpp"
#include "tdaec/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tdaec {

void TrainConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("train config: alpha must lie in [0, 1]");
    if (!(lr_end > 0.0 && lr_start >= lr_end)) throw std::invalid_argument("train config: need lr_start >= lr_end > 0");
    if (epochs == 0) throw std::invalid_argument("train config: epochs must be >= 1");
    if (patience == 0) throw std::invalid_argument("train config: patience must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw std::invalid_argument("train config: val_fraction must lie in (0, 1)");
}

double combine_loss(double mse, double ce, double alpha) { return (1.0 - alpha) * mse + alpha * ce; }

LossParts multitask_loss(const Tensor& s_hat, std::span<const double> s, const Tensor& class_probs,
                         std::span<const std::uint8_t> labels, double alpha) {
    if (s_hat.rank() != 1 || s_hat.numel() != s.size())
        throw ShapeError("multitask_loss: estimate " + shape_str(s_hat.shape()) + " vs target of " +
                         std::to_string(s.size()) + " samples");
    for (double x : s)
        if (!std::isfinite(x)) throw std::invalid_argument("multitask_loss: non-finite target sample");
    const Tensor target = Tensor::from({s.size()}, std::vector<double>(s.begin(), s.end()));
    const Tensor mse = mse_loss(s_hat, target, Reduction::Sum);
    const Tensor ce = cross_entropy_loss(class_probs, labels);
    LossParts out;
    out.mse = mse.item();
    out.ce = ce.item();
    out.total = add(scale(mse, 1.0 - alpha), scale(ce, alpha));
    return out;
}

LossParts example_loss(const TrainingExample& ex, const AecModelParams& params, const ModelConfig& mcfg, double alpha) {
    const auto out = forward(ex.mixture, ex.far_end, params, mcfg);
    return multitask_loss(out.s_hat, ex.near_end, out.class_probs, ex.labels, alpha);
}

TrainSession start_session(const ModelConfig& mcfg, const TrainConfig& tcfg, std::uint64_t init_seed) {
    tcfg.validate();
    TrainSession s;
    s.model = mcfg;
    s.params = AecModelParams::init(mcfg, init_seed);
    s.best = s.params.clone();
    s.state.config = tcfg;
    return s;
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
    return idx;
}

void check_finite_loss(double v, const std::string& where) {
    if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "training diverged: loss is " << v << " " << where;
        throw TrainingDiverged(msg.str());
    }
}

} // namespace

void train(TrainSession& session, const std::vector<TrainingExample>& train_set,
           const std::vector<TrainingExample>& val_set, const TrainOptions& options) {
    auto& st = session.state;
    const TrainConfig& tc = st.config;
    tc.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (val_set.empty()) throw std::invalid_argument("train: empty validation set");

    std::vector<Tensor> params = session.params.tensors();
    EarlyStopping stopper(tc.patience);
    stopper.restore(st.best_val, st.stale);
    std::size_t ran = 0;
    while (!st.stopped && st.next_epoch < tc.epochs) {
        if (options.max_epochs && ran >= *options.max_epochs) break;
        const std::size_t epoch = st.next_epoch;
        const double lr = lr_at(static_cast<double>(epoch), tc.lr_start, tc.lr_end, tc.epochs);

        double train_sum = 0.0;
        for (std::size_t idx : permutation(train_set.size(), mix_seed(tc.seed, epoch))) {
            session.params.zero_grad();
            const auto loss = example_loss(train_set[idx], session.params, session.model, tc.alpha);
            const double v = loss.total.item();
            check_finite_loss(v, "at epoch " + std::to_string(epoch) + ", training example " + std::to_string(idx));
            backward(loss.total);
            adam_step(params, st.adam, lr);
            train_sum += v;
        }
        session.params.zero_grad();

        double val_sum = 0.0;
        {
            NoGradGuard no_grad;
            for (std::size_t i = 0; i < val_set.size(); ++i) {
                const double v = example_loss(val_set[i], session.params, session.model, tc.alpha).total.item();
                check_finite_loss(v, "at epoch " + std::to_string(epoch) + ", validation example " + std::to_string(i));
                val_sum += v;
            }
        }

        const EpochRecord rec{epoch, train_sum / static_cast<double>(train_set.size()),
                              val_sum / static_cast<double>(val_set.size()), lr};
        st.history.push_back(rec);
        const bool improved = stopper.update(rec.val_loss);
        st.best_val = stopper.best();
        st.stale = stopper.stale();
        if (improved) session.best = session.params.clone();
        st.next_epoch = epoch + 1;
        st.stopped = stopper.should_stop() || st.next_epoch >= tc.epochs;

        if (options.out_dir) {
            std::filesystem::create_directories(*options.out_dir);
            save_checkpoint(*options.out_dir / "last.ckpt", Checkpoint{session.model, session.params, st});
            if (improved) save_checkpoint(*options.out_dir / "best.ckpt", Checkpoint{session.model, session.best, st});
            write_history(*options.out_dir / "history.tsv", st.history);
        }
        if (options.on_epoch) options.on_epoch(rec);
        ++ran;
    }
}

SplitIndices validation_split(std::size_t n, double fraction, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("validation_split: no records");
    SplitIndices out;
    if (n == 1) {
        out.train = {0};
        out.val = {0};
        return out;
    }
    const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n))), 1, n - 1);
    auto idx = permutation(n, mix_seed(seed, 0x76616c));
    out.val.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    out.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

TrainingExample load_example(const ManifestRecord& record, const ModelConfig& mcfg) {
    if (record.frame_len != mcfg.L || record.hop != mcfg.hop)
        throw std::invalid_argument(record.label_path.string() + ": labels framed at " + std::to_string(record.frame_len) +
                                    "/" + std::to_string(record.hop) + ", model uses " + std::to_string(mcfg.L) + "/" +
                                    std::to_string(mcfg.hop));
    TrainingExample ex;
    ex.mixture = read_wav(record.mixture_path).samples;
    ex.far_end = read_wav(record.far_end_path).samples;
    ex.near_end = read_wav(record.near_end_path).samples;
    ex.labels = read_labels(record.label_path);
    if (ex.far_end.size() != ex.mixture.size() || ex.near_end.size() != ex.mixture.size())
        throw std::invalid_argument(record.mixture_path.string() + ": mixture/far-end/near-end lengths differ");
    const std::size_t frames = frame_count(ex.mixture.size(), mcfg);
    if (ex.labels.size() != frames)
        throw std::invalid_argument(record.label_path.string() + ": " + std::to_string(ex.labels.size()) +
                                    " labels for " + std::to_string(frames) + " frames");
    return ex;
}

TrainSession train_from_manifest(const DatasetManifest& manifest, const ModelConfig& mcfg, const TrainConfig& tcfg,
                                 const TrainOptions& options, std::uint64_t init_seed) {
    const auto records = records_in_split(manifest, "train");
    if (records.empty()) throw std::invalid_argument("train: manifest has no training records");
    TrainSession session;
    const auto last = options.out_dir ? *options.out_dir / "last.ckpt" : std::filesystem::path{};
    if (options.out_dir && std::filesystem::exists(last)) {
        auto ckpt = load_checkpoint(last);
        if (!(ckpt.model == mcfg)) throw std::invalid_argument(last.string() + ": model config differs from the requested one");
        if (!ckpt.state) throw std::invalid_argument(last.string() + ": no training state to resume from");
        session.model = ckpt.model;
        session.params = std::move(ckpt.params);
        session.state = std::move(*ckpt.state);
        const auto best = *options.out_dir / "best.ckpt";
        session.best = std::filesystem::exists(best) ? load_checkpoint(best).params : session.params.clone();
    } else {
        session = start_session(mcfg, tcfg, init_seed);
    }
    // A resumed run keeps the split of its stored config.
    const TrainConfig& tc = session.state.config;
    const auto split = validation_split(records.size(), tc.val_fraction, tc.seed);
    std::vector<TrainingExample> train_set, val_set;
    for (std::size_t i : split.train) train_set.push_back(load_example(records[i], mcfg));
    for (std::size_t i : split.val) val_set.push_back(load_example(records[i], mcfg));
    train(session, train_set, val_set, options);
    return session;
}

void write_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& h : history) out << h.epoch << '\t' << h.train_loss << '\t' << h.val_loss << '\n';
    const std::string s = out.str();
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

} // namespace tdaec
