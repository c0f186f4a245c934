/* Copyright 2026 The cotraj Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include "cotraj/config.hpp"

namespace cotraj {
namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, EmptyObjectGivesDefaults) {
  const auto c = parse_config("{}");
  EXPECT_EQ(c.assoc.tau_iou, 0.3);
  EXPECT_EQ(c.assoc.tau_overlap, 0.3);
  EXPECT_EQ(c.encoder.d_model, 64);
  EXPECT_EQ(c.encoder.rounds, 2);
  EXPECT_EQ(c.encoder.r_social, 50.0);
  EXPECT_EQ(c.encoder.r_map, 30.0);
  EXPECT_EQ(c.encoder.tau_history, 0);
  EXPECT_EQ(c.fusion.window, 5);
  EXPECT_EQ(c.decoder.K, 6);
  EXPECT_EQ(c.decoder.R, 5);
  EXPECT_EQ(c.decoder.lambda, 1.0);
  EXPECT_EQ(c.training.epochs, 64);
  EXPECT_EQ(c.training.lr, 5e-4);
  EXPECT_TRUE(c.ablation.use_mvcm && c.ablation.use_fam && c.ablation.use_signals);
}

TEST(Config, RoundTripsThroughJson) {
  PipelineConfig c;
  c.encoder.d_model = 32;
  c.encoder.signal_color = false;
  c.decoder.horizon = 50;
  c.training.lr = 1e-3;
  c.ablation.use_fam = false;
  c.model_seed = 99;
  const auto back = parse_config(config_to_json(c).dump());
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, ReportsEveryProblemAtOnce) {
  const std::string msg = error_of(R"({
    "encoder": {"d_model": "big", "colour": 1},
    "decoder": {"K": 2.5},
    "training": {"seed": -1},
    "ablation": {"use_mvcm": 1},
    "extra": {}
  })");
  for (const char* want : {"encoder.d_model: expected an integer", "encoder.colour: unknown key",
                           "decoder.K: expected an integer", "training.seed: expected a non-negative integer",
                           "ablation.use_mvcm: expected a boolean", "extra: unknown key"})
    EXPECT_NE(msg.find(want), std::string::npos) << want << "\n" << msg;
}

TEST(Config, SemanticChecks) {
  EXPECT_NE(error_of(R"({"encoder": {"d_model": 10, "heads": 4}})").find("divide"), std::string::npos);
  EXPECT_NE(error_of(R"({"decoder": {"K": 0}})"), "");
  EXPECT_NE(error_of(R"({"decoder": {"lambda": -1}})"), "");
  EXPECT_NE(error_of(R"({"training": {"lr": 0}})"), "");
  EXPECT_NE(error_of(R"({"encoder": {"r_social": -5}})"), "");
  EXPECT_NE(error_of(R"({"assoc": {"tau_iou": 1.5}})"), "");
  EXPECT_NE(error_of(R"({"fusion": 3})").find("must be an object"), std::string::npos);
}

TEST(Config, MalformedJson) {
  EXPECT_NE(error_of("{not json").find("not valid JSON"), std::string::npos);
  EXPECT_THROW(load_config("/nonexistent/cfg.json"), ConfigError);
}

}  // namespace
}  // namespace cotraj
