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

#include "tdaec/checkpoint.hpp"

#include <cstring>
#include <map>

namespace tdaec {

namespace {

constexpr char kMagic[4] = {'A', 'E', 'C', 'K'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '!'};

void put_tag(std::vector<std::uint8_t>& out, const char (&tag)[4]) { out.insert(out.end(), tag, tag + 4); }

void expect_tag(le::Reader& r, const char (&tag)[4], const std::string& what) {
    const auto got = r.take(4);
    if (std::memcmp(got.data(), tag, 4) != 0)
        throw CheckpointError(what + ": expected '" + std::string(tag, 4) + "' marker");
}

void put_doubles(std::vector<std::uint8_t>& out, std::span<const double> xs) {
    le::put_u64(out, xs.size());
    for (double x : xs) le::put_f64(out, x);
}

std::vector<double> get_doubles(le::Reader& r, const std::string& what) {
    const std::uint64_t n = r.u64();
    if (n > r.remaining() / 8) throw CheckpointError(what + ": array length exceeds file size");
    std::vector<double> xs(n);
    for (auto& x : xs) x = r.f64();
    return xs;
}

void put_state(std::vector<std::uint8_t>& out, const TrainingState& s) {
    const auto& c = s.config;
    le::put_f64(out, c.alpha);
    le::put_f64(out, c.lr_start);
    le::put_f64(out, c.lr_end);
    le::put_u64(out, c.epochs);
    le::put_u64(out, c.patience);
    le::put_f64(out, c.val_fraction);
    le::put_u64(out, c.seed);
    le::put_u64(out, s.next_epoch);
    le::put_f64(out, s.adam.beta1);
    le::put_f64(out, s.adam.beta2);
    le::put_f64(out, s.adam.eps);
    le::put_u64(out, s.adam.step);
    le::put_u32(out, static_cast<std::uint32_t>(s.adam.m.size()));
    for (std::size_t i = 0; i < s.adam.m.size(); ++i) {
        put_doubles(out, s.adam.m[i]);
        put_doubles(out, s.adam.v[i]);
    }
    le::put_f64(out, s.best_val);
    le::put_u64(out, s.stale);
    out.push_back(s.stopped ? 1 : 0);
    le::put_u32(out, static_cast<std::uint32_t>(s.history.size()));
    for (const auto& h : s.history) {
        le::put_u64(out, h.epoch);
        le::put_f64(out, h.train_loss);
        le::put_f64(out, h.val_loss);
        le::put_f64(out, h.lr);
    }
}

TrainingState get_state(le::Reader& r, const std::string& what) {
    TrainingState s;
    auto& c = s.config;
    c.alpha = r.f64();
    c.lr_start = r.f64();
    c.lr_end = r.f64();
    c.epochs = r.u64();
    c.patience = r.u64();
    c.val_fraction = r.f64();
    c.seed = r.u64();
    s.next_epoch = r.u64();
    s.adam.beta1 = r.f64();
    s.adam.beta2 = r.f64();
    s.adam.eps = r.f64();
    s.adam.step = r.u64();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        s.adam.m.push_back(get_doubles(r, what));
        s.adam.v.push_back(get_doubles(r, what));
    }
    s.best_val = r.f64();
    s.stale = r.u64();
    s.stopped = r.u8() != 0;
    const std::uint32_t h = r.u32();
    for (std::uint32_t i = 0; i < h; ++i) {
        EpochRecord e;
        e.epoch = r.u64();
        e.train_loss = r.f64();
        e.val_loss = r.f64();
        e.lr = r.f64();
        s.history.push_back(e);
    }
    return s;
}

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out;
    put_tag(out, kMagic);
    le::put_u32(out, kCheckpointVersion);
    const auto& m = ckpt.model;
    for (std::size_t v : {m.N, m.L, m.hop, m.B, m.H, m.window, m.classes, static_cast<std::size_t>(m.prelu)})
        le::put_u64(out, v);
    const auto named = ckpt.params.named();
    le::put_u32(out, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, t] : named) {
        le::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        le::put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) le::put_u64(out, d);
        for (double x : t.data()) le::put_f64(out, x);
    }
    out.push_back(ckpt.state ? 1 : 0);
    if (ckpt.state) put_state(out, *ckpt.state);
    put_tag(out, kTrailer);
    return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& what) {
    try {
        le::Reader r(bytes, what);
        expect_tag(r, kMagic, what);
        const std::uint32_t version = r.u32();
        if (version != kCheckpointVersion)
            throw CheckpointError(what + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
        Checkpoint ckpt;
        auto& m = ckpt.model;
        for (std::size_t* v : {&m.N, &m.L, &m.hop, &m.B, &m.H, &m.window, &m.classes}) *v = r.u64();
        const std::uint64_t prelu = r.u64();
        if (prelu > 1) throw CheckpointError(what + ": bad PReLU placement " + std::to_string(prelu));
        m.prelu = static_cast<PreluPlacement>(prelu);
        m.validate();

        ckpt.params = AecModelParams::init(m, 0);
        std::map<std::string, Tensor> by_name;
        for (auto& [name, t] : ckpt.params.named()) by_name.emplace(name, t);
        const std::uint32_t count = r.u32();
        if (count != by_name.size())
            throw CheckpointError(what + ": holds " + std::to_string(count) + " tensors, model expects " +
                                  std::to_string(by_name.size()));
        for (std::uint32_t i = 0; i < count; ++i) {
            const auto raw = r.take(r.u32());
            const std::string name(raw.begin(), raw.end());
            auto it = by_name.find(name);
            if (it == by_name.end()) throw CheckpointError(what + ": unknown tensor '" + name + "'");
            Shape shape(r.u32());
            for (auto& d : shape) d = r.u64();
            if (shape != it->second.shape())
                throw CheckpointError(what + ": tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                                      shape_str(it->second.shape()));
            for (double& x : it->second.mutable_data()) x = r.f64();
            require_finite(it->second.data(), what + " tensor '" + name + "'");
        }
        if (r.u8() != 0) ckpt.state = get_state(r, what);
        expect_tag(r, kTrailer, what);
        if (r.remaining() != 0) throw CheckpointError(what + ": trailing bytes after end marker");
        return ckpt;
    } catch (const AudioIoError& e) {
        throw CheckpointError(e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(what + ": " + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    // Write-then-rename so an interrupted save never leaves a torn file.
    auto tmp = path;
    tmp += ".tmp";
    write_file_bytes(tmp, encode_checkpoint(ckpt));
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(path);
    } catch (const AudioIoError& e) {
        throw CheckpointError(e.what());
    }
    return decode_checkpoint(bytes, path.string());
}

} // namespace tdaec
