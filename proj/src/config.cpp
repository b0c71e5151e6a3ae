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

#include "tdaec/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <initializer_list>

namespace tdaec {

using nlohmann::json;

void ToolkitConfig::set_seed(std::uint64_t seed) {
    generation.seed = seed;
    train.seed = seed;
    init_seed = seed;
}

namespace {

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = it->template get<T>();
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out) {
    if (auto it = obj.find(key); it != obj.end()) {
        if (it->is_null()) out.reset();
        else out = it->template get<T>();
    }
}

std::array<double, 3> read_point(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void parse_generation(const json& g, GenerationConfig& cfg) {
    allow_keys(g, "generation", {"seed", "n_train", "n_test", "duration_s", "rir_taps", "train_ser_db", "test_ser_db",
                                 "snr_db", "nonlinear", "clip_ratio", "sigmoid_gain", "corpus_dir", "labels", "rooms",
                                 "jobs"});
    read(g, "seed", cfg.seed);
    read(g, "n_train", cfg.n_train);
    read(g, "n_test", cfg.n_test);
    read(g, "duration_s", cfg.duration_s);
    read(g, "rir_taps", cfg.rir_taps);
    read(g, "train_ser_db", cfg.train_ser_db);
    read(g, "test_ser_db", cfg.test_ser_db);
    read_optional(g, "snr_db", cfg.snr_db);
    read(g, "nonlinear", cfg.nonlinear);
    read(g, "clip_ratio", cfg.clip_ratio);
    read_optional(g, "sigmoid_gain", cfg.sigmoid_gain);
    read(g, "jobs", cfg.jobs);
    if (auto it = g.find("corpus_dir"); it != g.end() && !it->is_null()) cfg.corpus_dir = it->get<std::string>();
    if (auto it = g.find("labels"); it != g.end()) {
        allow_keys(*it, "generation.labels", {"frame_len", "hop", "threshold_db"});
        read(*it, "frame_len", cfg.labels.frame_len);
        read(*it, "hop", cfg.labels.hop);
        read(*it, "threshold_db", cfg.labels.threshold_db);
    }
    if (auto it = g.find("rooms"); it != g.end()) {
        if (!it->is_array()) throw ConfigError("generation.rooms: expected an array");
        cfg.rooms.clear();
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& r = (*it)[i];
            const std::string where = "generation.rooms[" + std::to_string(i) + "]";
            allow_keys(r, where, {"dims", "source", "mic", "t60"});
            RoomSpec room;
            if (r.contains("dims")) room.geometry.dims = read_point(r["dims"], where + ".dims");
            if (r.contains("source")) room.geometry.source = read_point(r["source"], where + ".source");
            if (r.contains("mic")) room.geometry.mic = read_point(r["mic"], where + ".mic");
            read(r, "t60", room.t60);
            cfg.rooms.push_back(room);
        }
    }
}

void parse_model(const json& m, ModelConfig& cfg) {
    allow_keys(m, "model", {"N", "L", "hop", "B", "H", "window", "prelu"});
    read(m, "N", cfg.N);
    read(m, "L", cfg.L);
    read(m, "hop", cfg.hop);
    read(m, "B", cfg.B);
    read(m, "H", cfg.H);
    read(m, "window", cfg.window);
    if (auto it = m.find("prelu"); it != m.end()) {
        const auto v = it->get<std::string>();
        if (v == "near") cfg.prelu = PreluPlacement::NearRep;
        else if (v == "mix") cfg.prelu = PreluPlacement::MixRep;
        else throw ConfigError("model.prelu: expected \"near\" or \"mix\", got \"" + v + "\"");
    }
}

void parse_train(const json& t, TrainConfig& cfg, std::uint64_t& init_seed) {
    allow_keys(t, "train", {"alpha", "lr_start", "lr_end", "epochs", "patience", "val_fraction", "seed", "init_seed"});
    read(t, "alpha", cfg.alpha);
    read(t, "lr_start", cfg.lr_start);
    read(t, "lr_end", cfg.lr_end);
    read(t, "epochs", cfg.epochs);
    read(t, "patience", cfg.patience);
    read(t, "val_fraction", cfg.val_fraction);
    read(t, "seed", cfg.seed);
    read(t, "init_seed", init_seed);
}

} // namespace

ToolkitConfig parse_config(const std::string& text, const std::string& what) {
    ToolkitConfig cfg;
    try {
        const json root = json::parse(text);
        allow_keys(root, what, {"seed", "generation", "model", "train", "nlms", "fdaf"});
        if (auto it = root.find("seed"); it != root.end()) cfg.set_seed(it->get<std::uint64_t>());
        if (auto it = root.find("generation"); it != root.end()) parse_generation(*it, cfg.generation);
        if (auto it = root.find("model"); it != root.end()) parse_model(*it, cfg.model);
        if (auto it = root.find("train"); it != root.end()) parse_train(*it, cfg.train, cfg.init_seed);
        if (auto it = root.find("nlms"); it != root.end()) {
            allow_keys(*it, "nlms", {"taps", "mu", "eps"});
            read(*it, "taps", cfg.nlms.taps);
            read(*it, "mu", cfg.nlms.mu);
            read(*it, "eps", cfg.nlms.eps);
        }
        if (auto it = root.find("fdaf"); it != root.end()) {
            allow_keys(*it, "fdaf", {"block", "partitions", "mu", "eps", "power_smoothing"});
            read(*it, "block", cfg.fdaf.block);
            read(*it, "partitions", cfg.fdaf.partitions);
            read(*it, "mu", cfg.fdaf.mu);
            read(*it, "eps", cfg.fdaf.eps);
            read(*it, "power_smoothing", cfg.fdaf.power_smoothing);
        }
        cfg.model.validate();
        cfg.train.validate();
        cfg.nlms.validate();
        cfg.fdaf.validate();
    } catch (const json::exception& e) {
        throw ConfigError(what + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(what + ": " + e.what());
    }
    return cfg;
}

ToolkitConfig load_config(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_config(std::string(bytes.begin(), bytes.end()), path.string());
}

std::optional<std::filesystem::path> default_config_path() {
    const char* v = std::getenv(kConfigEnvVar);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::filesystem::path(v);
}

} // namespace tdaec
