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

#include "tdaec/cli.hpp"

#include "tdaec/baselines.hpp"
#include "tdaec/checkpoint.hpp"
#include "tdaec/config.hpp"
#include "tdaec/evaluate.hpp"
#include "tdaec/gradcheck.hpp"
#include "tdaec/metrics.hpp"
#include "tdaec/model.hpp"
#include "tdaec/synth.hpp"
#include "tdaec/training.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>

namespace tdaec::cli {

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
};

ToolkitConfig resolve_config(const CommonFlags& f) {
    ToolkitConfig cfg;
    if (!f.config.empty()) cfg = load_config(f.config);
    else if (auto env = default_config_path()) cfg = load_config(*env);
    if (f.seed) cfg.set_seed(*f.seed);
    cfg.generation.jobs = std::max<std::size_t>(f.jobs, 1);
    return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool with_config = true) {
    if (with_config)
        cmd->add_option("--config", f.config, std::string("JSON config file (default: $") + kConfigEnvVar + ")")
            ->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Override every seed in the config");
    cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Time-domain acoustic echo cancellation toolkit", "tdaec"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    CommonFlags common;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and manifest");
    std::string synth_out;
    add_common(synth, common);
    synth->add_option("--out", synth_out, "Output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "Train the model; resumes if --out holds last.ckpt");
    std::string train_data, train_out;
    std::optional<std::size_t> train_epochs, train_max_epochs;
    add_common(train_cmd, common);
    train_cmd->add_option("--data", train_data, "Dataset manifest")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_out, "Output directory (best.ckpt, last.ckpt, history.tsv)")->required();
    train_cmd->add_option("--epochs", train_epochs, "Override the epoch budget");
    train_cmd->add_option("--max-epochs", train_max_epochs, "Stop this run after N epochs (resumable)");

    auto* cancel_cmd = app.add_subcommand("cancel", "Run a trained model on one recording");
    std::string cancel_model, cancel_mix, cancel_far, cancel_out, cancel_labels;
    cancel_cmd->add_option("--model", cancel_model, "Checkpoint")->required()->check(CLI::ExistingFile);
    cancel_cmd->add_option("--mix", cancel_mix, "Microphone WAV")->required()->check(CLI::ExistingFile);
    cancel_cmd->add_option("--far", cancel_far, "Far-end WAV")->required()->check(CLI::ExistingFile);
    cancel_cmd->add_option("--out", cancel_out, "Output WAV (estimated near-end)")->required();
    cancel_cmd->add_option("--labels-out", cancel_labels, "Also write per-frame talk classes");

    auto* baseline_cmd = app.add_subcommand("baseline", "Run a linear adaptive-filter canceller");
    std::string base_algo, base_mix, base_far, base_out;
    add_common(baseline_cmd, common);
    baseline_cmd->add_option("--algo", base_algo, "nlms or fdaf")->required()->check(CLI::IsMember({"nlms", "fdaf"}));
    baseline_cmd->add_option("--mix", base_mix, "Microphone WAV")->required()->check(CLI::ExistingFile);
    baseline_cmd->add_option("--far", base_far, "Far-end WAV")->required()->check(CLI::ExistingFile);
    baseline_cmd->add_option("--out", base_out, "Output WAV (residual)")->required();
    std::optional<std::size_t> taps, block, partitions;
    std::optional<double> mu, eps;
    baseline_cmd->add_option("--taps", taps, "NLMS filter length");
    baseline_cmd->add_option("--block", block, "FDAF block length (power of two)");
    baseline_cmd->add_option("--partitions", partitions, "FDAF partition count");
    baseline_cmd->add_option("--mu", mu, "Step size");
    baseline_cmd->add_option("--eps", eps, "Regularizer");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model or baseline over a manifest split");
    std::string eval_data, eval_model, eval_algo, eval_out, eval_split = "test";
    add_common(eval_cmd, common);
    eval_cmd->add_option("--data", eval_data, "Dataset manifest")->required()->check(CLI::ExistingFile);
    auto* model_opt = eval_cmd->add_option("--model", eval_model, "Checkpoint")->check(CLI::ExistingFile);
    auto* algo_opt = eval_cmd->add_option("--algo", eval_algo, "nlms, fdaf, oracle or identity")
                         ->check(CLI::IsMember({"nlms", "fdaf", "oracle", "identity"}));
    model_opt->excludes(algo_opt);
    eval_cmd->add_option("--split", eval_split, "Manifest split");
    eval_cmd->add_option("--out", eval_out, "Report file (default: stdout)");

    auto* spec_cmd = app.add_subcommand("spectrogram", "Render a WAV as a PGM spectrogram");
    std::string spec_in, spec_out;
    spec_cmd->add_option("--in", spec_in, "Input WAV")->required()->check(CLI::ExistingFile);
    spec_cmd->add_option("--out", spec_out, "Output PGM")->required();

    auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference check of every differentiable op");
    std::uint64_t grad_seed = 7;
    grad_cmd->add_option("--seed", grad_seed, "Probe seed");

    std::vector<std::string> argv_store{"tdaec"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        if (eval_cmd->parsed() && eval_model.empty() && eval_algo.empty())
            throw CLI::ValidationError("eval", "one of --model or --algo is required");
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed()) {
            const auto cfg = resolve_config(common);
            const auto manifest = build_dataset(cfg.generation, synth_out);
            out << "wrote " << manifest.records.size() << " records to " << synth_out << '\n';
        } else if (train_cmd->parsed()) {
            auto cfg = resolve_config(common);
            if (train_epochs) cfg.train.epochs = *train_epochs;
            TrainOptions opts;
            opts.out_dir = train_out;
            opts.max_epochs = train_max_epochs;
            opts.on_epoch = [&](const EpochRecord& r) {
                out << "epoch " << r.epoch << "\ttrain " << r.train_loss << "\tval " << r.val_loss << "\tlr " << r.lr
                    << std::endl;
            };
            const auto session = train_from_manifest(read_manifest(train_data), cfg.model, cfg.train, opts, cfg.init_seed);
            out << "best validation loss " << session.state.best_val << " after " << session.state.next_epoch
                << " epochs\n";
        } else if (cancel_cmd->parsed()) {
            const auto ckpt = load_checkpoint(cancel_model);
            const auto inf = run_inference(read_wav(cancel_mix), read_wav(cancel_far), ckpt.params, ckpt.model);
            write_wav(cancel_out, inf.s_hat);
            if (!cancel_labels.empty()) write_labels(cancel_labels, inf.classes);
        } else if (baseline_cmd->parsed()) {
            auto cfg = resolve_config(common);
            const auto mix = read_wav(base_mix), far = read_wav(base_far);
            CancelResult res;
            if (base_algo == "nlms") {
                if (taps) cfg.nlms.taps = *taps;
                if (mu) cfg.nlms.mu = *mu;
                if (eps) cfg.nlms.eps = *eps;
                res = nlms_cancel(far.samples, mix.samples, cfg.nlms);
            } else {
                if (block) cfg.fdaf.block = *block;
                if (partitions) cfg.fdaf.partitions = *partitions;
                if (mu) cfg.fdaf.mu = *mu;
                if (eps) cfg.fdaf.eps = *eps;
                res = fdaf_cancel(far.samples, mix.samples, cfg.fdaf);
            }
            write_wav(base_out, res.residual);
        } else if (eval_cmd->parsed()) {
            const auto cfg = resolve_config(common);
            Canceller canceller;
            if (!eval_model.empty()) {
                const auto ckpt = load_checkpoint(eval_model);
                canceller = model_canceller(ckpt.params, ckpt.model);
            } else if (eval_algo == "nlms") canceller = nlms_canceller(cfg.nlms);
            else if (eval_algo == "fdaf") canceller = fdaf_canceller(cfg.fdaf);
            else if (eval_algo == "oracle") canceller = oracle_canceller();
            else canceller = identity_canceller();
            const auto report = evaluate_manifest(read_manifest(eval_data), eval_split, canceller, common.jobs);
            if (eval_out.empty()) out << format_report(report);
            else write_report(eval_out, report);
        } else if (spec_cmd->parsed()) {
            spectrogram_image(read_wav(spec_in).samples, spec_out);
        } else if (grad_cmd->parsed()) {
            const auto t0 = std::chrono::steady_clock::now();
            bool ok = true;
            out << "op\tpoints\tmax_rel_error\n";
            for (const auto& r : run_gradient_suite(grad_seed)) {
                out << r.name << '\t' << r.points << '\t' << r.max_rel_error << '\n';
                ok = ok && r.max_rel_error < kGradCheckTolerance;
            }
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out << (ok ? "all ops below " : "FAILED: some op at or above ") << kGradCheckTolerance << " (" << secs
                << " s)\n";
            return ok ? kExitOk : kExitFailure;
        }
    } catch (const std::exception& e) {
        err << "tdaec: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace tdaec::cli
