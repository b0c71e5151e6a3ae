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

#include "tdaec/parallel.hpp"

#include <map>
#include <sstream>

namespace tdaec {

Canceller model_canceller(const AecModelParams& params, const ModelConfig& cfg) {
    return [params, cfg](const EvalItem& item) {
        Waveform mix{item.mixture, kSampleRate}, far{item.far_end, kSampleRate};
        auto inf = run_inference(mix, far, params, cfg);
        return CancelOutcome{std::move(inf.s_hat.samples), std::move(inf.classes)};
    };
}

Canceller nlms_canceller(const NlmsConfig& cfg) {
    cfg.validate();
    return [cfg](const EvalItem& item) {
        return CancelOutcome{nlms_cancel(item.far_end, item.mixture, cfg).residual.samples, std::nullopt};
    };
}

Canceller fdaf_canceller(const FdafConfig& cfg) {
    cfg.validate();
    return [cfg](const EvalItem& item) {
        return CancelOutcome{fdaf_cancel(item.far_end, item.mixture, cfg).residual.samples, std::nullopt};
    };
}

Canceller oracle_canceller() {
    return [](const EvalItem& item) { return CancelOutcome{item.near_end, item.labels.labels}; };
}

Canceller identity_canceller() {
    return [](const EvalItem& item) { return CancelOutcome{item.mixture, std::nullopt}; };
}

EvalItem load_eval_item(const ManifestRecord& record) {
    EvalItem item;
    item.mixture = read_wav(record.mixture_path).samples;
    item.far_end = read_wav(record.far_end_path).samples;
    item.near_end = read_wav(record.near_end_path).samples;
    item.labels.labels = read_labels(record.label_path);
    item.labels.frame_len = record.frame_len;
    item.labels.hop = record.hop;
    item.ser_db = record.ser_db;
    if (item.far_end.size() != item.mixture.size() || item.near_end.size() != item.mixture.size())
        throw AudioIoError(record.mixture_path.string() + ": mixture/far-end/near-end lengths differ");
    if (item.labels.labels.size() != label_count(item.mixture.size(), record.frame_len, record.hop))
        throw AudioIoError(record.label_path.string() + ": label count does not match the signal length");
    return item;
}

namespace {

struct ItemScores {
    std::optional<double> erle;
    std::optional<double> si_snr;
    std::optional<DtdResult> dtd;
    std::size_t frames = 0;
};

std::string format_ser(double ser) {
    std::ostringstream s;
    s << ser;
    return s.str();
}

LevelStats aggregate(const std::string& name, const std::vector<const ItemScores*>& scores) {
    LevelStats out;
    out.ser = name;
    out.records = scores.size();
    double erle_sum = 0.0, snr_sum = 0.0;
    std::size_t erle_n = 0, snr_n = 0, frames = 0, hits = 0;
    for (const auto* s : scores) {
        if (s->erle) erle_sum += *s->erle, ++erle_n;
        if (s->si_snr) snr_sum += *s->si_snr, ++snr_n;
        if (s->dtd) {
            frames += s->frames;
            for (std::size_t t = 0; t < kTalkClassCount; ++t) {
                hits += s->dtd->confusion[t][t];
                for (std::size_t p = 0; p < kTalkClassCount; ++p) out.confusion[t][p] += s->dtd->confusion[t][p];
            }
        }
    }
    if (erle_n) out.erle_db = erle_sum / static_cast<double>(erle_n);
    if (snr_n) out.si_snr_db = snr_sum / static_cast<double>(snr_n);
    if (frames) out.dtd_accuracy = static_cast<double>(hits) / static_cast<double>(frames);
    return out;
}

} // namespace

EvalReport evaluate(const std::vector<EvalItem>& items, const Canceller& canceller, std::size_t jobs) {
    std::vector<ItemScores> scores(items.size());
    parallel_for(items.size(), jobs, [&](std::size_t i) {
        const auto& item = items[i];
        const auto out = canceller(item);
        if (out.s_hat.size() != item.mixture.size())
            throw std::runtime_error("evaluate: canceller returned " + std::to_string(out.s_hat.size()) +
                                     " samples for a " + std::to_string(item.mixture.size()) + "-sample input");
        auto& s = scores[i];
        s.erle = erle(item.mixture, out.s_hat, item.labels);
        if (std::any_of(item.near_end.begin(), item.near_end.end(), [](double x) { return x != 0.0; }))
            s.si_snr = si_snr(item.near_end, out.s_hat, item.labels);
        if (out.classes) {
            s.dtd = dtd_accuracy(*out.classes, item.labels.labels);
            s.frames = item.labels.labels.size();
        }
    });

    std::map<double, std::vector<const ItemScores*>> by_level;
    std::vector<const ItemScores*> all;
    for (std::size_t i = 0; i < items.size(); ++i) {
        by_level[items[i].ser_db].push_back(&scores[i]);
        all.push_back(&scores[i]);
    }
    EvalReport report;
    for (const auto& [ser, group] : by_level) report.levels.push_back(aggregate(format_ser(ser), group));
    report.overall = aggregate("all", all);
    return report;
}

EvalReport evaluate_manifest(const DatasetManifest& manifest, const std::string& split, const Canceller& canceller,
                             std::size_t jobs) {
    const auto records = records_in_split(manifest, split);
    if (records.empty()) throw std::invalid_argument("evaluate: manifest has no '" + split + "' records");
    std::vector<EvalItem> items(records.size());
    parallel_for(records.size(), jobs, [&](std::size_t i) { items[i] = load_eval_item(records[i]); });
    return evaluate(items, canceller, jobs);
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out.precision(10);
    auto value = [&](const std::optional<double>& v) {
        if (v) out << *v;
        else out << "absent";
        out << '\n';
    };
    std::vector<const LevelStats*> rows;
    for (const auto& l : report.levels) rows.push_back(&l);
    rows.push_back(&report.overall);
    out << "metric\tser_db\tvalue\n";
    for (const auto* l : rows) {
        out << "records\t" << l->ser << '\t' << l->records << '\n';
        out << "erle_db\t" << l->ser << '\t';
        value(l->erle_db);
        out << "si_snr_db\t" << l->ser << '\t';
        value(l->si_snr_db);
        out << "dtd_accuracy\t" << l->ser << '\t';
        value(l->dtd_accuracy);
    }
    out << "\nconfusion\tser_db\ttruth\tsilence\tnear_only\tfar_only\tdouble_talk\n";
    for (const auto* l : rows) {
        if (!l->dtd_accuracy) continue;
        for (std::size_t t = 0; t < kTalkClassCount; ++t) {
            out << "confusion\t" << l->ser << '\t' << t;
            for (std::size_t p = 0; p < kTalkClassCount; ++p) out << '\t' << l->confusion[t][p];
            out << '\n';
        }
    }
    return out.str();
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
    const std::string s = format_report(report);
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

} // namespace tdaec
