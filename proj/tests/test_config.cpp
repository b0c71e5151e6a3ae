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

#include "test_util.hpp"

#include <cstdlib>
#include <fstream>

using namespace tdaec;
using namespace tdaec::testing;

TEST(Config, EmptyObjectGivesDefaults) {
    const auto c = parse_config("{}");
    EXPECT_EQ(c.model, ModelConfig{});
    EXPECT_EQ(c.train, TrainConfig{});
    EXPECT_EQ(c.nlms.taps, 1024u);
    EXPECT_EQ(c.fdaf.block, 256u);
    EXPECT_EQ(c.fdaf.partitions, 8u);
    EXPECT_EQ(c.generation.test_ser_db, (std::vector<double>{0.0, 3.5, 7.0}));
}

TEST(Config, ParsesSections) {
    const auto c = parse_config(R"({
        "seed": 9,
        "generation": {"n_train": 4, "duration_s": 0.5, "snr_db": 30, "nonlinear": true,
                       "labels": {"threshold_db": -35},
                       "rooms": [{"dims": [4, 4, 3], "t60": 0.6}]},
        "model": {"N": 64, "B": 32, "H": 32, "window": 10, "prelu": "mix"},
        "train": {"alpha": 0.01, "epochs": 20, "init_seed": 3},
        "nlms": {"taps": 256},
        "fdaf": {"block": 128, "partitions": 2}
    })");
    EXPECT_EQ(c.generation.seed, 9u);
    EXPECT_EQ(c.train.seed, 9u);
    EXPECT_EQ(c.init_seed, 3u);
    EXPECT_EQ(c.generation.n_train, 4u);
    EXPECT_EQ(c.generation.snr_db, 30.0);
    EXPECT_TRUE(c.generation.nonlinear);
    EXPECT_EQ(c.generation.labels.threshold_db, -35.0);
    ASSERT_EQ(c.generation.rooms.size(), 1u);
    EXPECT_EQ(c.generation.rooms[0].geometry.dims, (std::array<double, 3>{4.0, 4.0, 3.0}));
    EXPECT_EQ(c.generation.rooms[0].t60, 0.6);
    EXPECT_EQ(c.model.N, 64u);
    EXPECT_EQ(c.model.prelu, PreluPlacement::MixRep);
    EXPECT_EQ(c.train.alpha, 0.01);
    EXPECT_EQ(c.train.epochs, 20u);
    EXPECT_EQ(c.nlms.taps, 256u);
    EXPECT_EQ(c.fdaf.filter_length(), 256u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_config(R"({"modle": {}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"model": {"n": 3}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"model": {"prelu": "both"}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"model": {"hop": 0}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"train": {"alpha": 2}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"fdaf": {"block": 100}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"generation": {"rooms": [{"dims": [1, 2]}]}})"), ConfigError);
    EXPECT_THROW(parse_config("{not json"), ConfigError);
    EXPECT_THROW(parse_config(R"({"train": {"epochs": "many"}})"), ConfigError);
}

TEST(Config, FileAndEnvironment) {
    TempDir dir;
    {
        std::ofstream out(dir / "c.json");
        out << R"({"model": {"window": 7}})";
    }
    EXPECT_EQ(load_config(dir / "c.json").model.window, 7u);
    ::setenv(kConfigEnvVar, (dir / "c.json").c_str(), 1);
    ASSERT_TRUE(default_config_path().has_value());
    EXPECT_EQ(*default_config_path(), dir / "c.json");
    ::setenv(kConfigEnvVar, "", 1);
    EXPECT_FALSE(default_config_path().has_value());
    ::unsetenv(kConfigEnvVar);
    EXPECT_FALSE(default_config_path().has_value());
}
