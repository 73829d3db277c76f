// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>

#include "doctest.h"
#include "gradflow/config.hpp"
#include "support.hpp"

using namespace gradflow;

namespace {

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kFlow = R"({
  "seed": 3,
  "dataset": {"generator": "separable_2d", "n": 6},
  "net": {"widths": [2, 1], "activation": "linear"},
  "loss": "exponential",
  "step": 0.05,
  "stop": {"kind": "max_time", "max_time": 5}
})";

}  // namespace

TEST_CASE("flow config parses and is reproducible") {
  const auto a = parse_flow_config(kFlow, {});
  CHECK(a.seed == 3);
  CHECK(a.data.size() == 6);
  CHECK(a.net.input_dim() == 2);
  CHECK(a.loss == LossKind::exponential);
  CHECK(a.stop.max_time == 5.0);
  const auto b = parse_flow_config(kFlow, {});
  CHECK(a.net == b.net);
  CHECK(a.data.inputs == b.data.inputs);
}

TEST_CASE("seed override wins over the config") {
  ConfigContext ctx;
  ctx.seed_override = 99;
  const auto a = parse_flow_config(kFlow, ctx);
  CHECK(a.seed == 99);
  CHECK_FALSE(a.net == parse_flow_config(kFlow, {}).net);
}

TEST_CASE("unknown fields are rejected with their path") {
  const std::string top = error_of([] { parse_svm_config(R"({"dataset": {"generator": "separable_2d", "n": 4}, "extra": 1})", {}); });
  CHECK(top.find("unknown field 'extra'") != std::string::npos);
  const std::string nested = error_of([] {
    parse_flow_config(R"({"dataset": {"generator": "separable_2d", "n": 4}, "net": {"widths": [2, 1]},
                          "stop": {"kind": "max_time", "bogus": 2}})",
                      {});
  });
  CHECK(nested.find("stop.bogus") != std::string::npos);
}

TEST_CASE("missing and mistyped fields name the field") {
  const std::string missing = error_of([] { parse_svm_config("{}", {}); });
  CHECK(missing.find("dataset") != std::string::npos);
  const std::string typed = error_of([] {
    parse_flow_config(R"({"dataset": {"generator": "separable_2d", "n": 4}, "net": {"widths": [2, 1]}, "step": "fast"})",
                      {});
  });
  CHECK(typed.find("step") != std::string::npos);
  const std::string en = error_of([] {
    parse_flow_config(R"({"dataset": {"generator": "separable_2d", "n": 4}, "net": {"widths": [2, 1]}, "loss": "hinge"})",
                      {});
  });
  CHECK(en.find("loss") != std::string::npos);
  const std::string gen = error_of([] { parse_svm_config(R"({"dataset": {"generator": "moons", "n": 4}})", {}); });
  CHECK(gen.find("dataset.generator") != std::string::npos);
  CHECK_THROWS_AS(parse_svm_config("{not json", {}), ConfigError);
}

TEST_CASE("value constraints") {
  CHECK_THROWS_AS(parse_flow_config(R"({"dataset": {"generator": "separable_2d", "n": 4}, "net": {"widths": [2, 1]},
                                        "step": -1})",
                                    {}),
                  ConfigError);
  CHECK_THROWS_AS(parse_spectrum_config(R"({"dataset": {"generator": "blobs", "n": 4},
                                            "net": {"widths": [2, 30, 30, 1]}})",
                                        {}),
                  ConfigError);
  CHECK_THROWS_AS(parse_svm_config(R"({"dataset": {"generator": "separable_2d", "n": 25}})", {}), ConfigError);
}

TEST_CASE("inline nets and datasets") {
  const auto c = parse_svm_config(R"({"dataset": {"inputs": [[1, 0], [-1, 0]], "labels": [1, -1], "task": "binary"}})", {});
  CHECK(c.data.size() == 2);
  const auto s = parse_spectrum_config(R"({
    "dataset": {"inputs": [[1, 2]], "labels": [3], "task": "regression"},
    "net": {"activation": "linear", "layers": [{"shape": [1, 2], "data": [1, 1]}]},
    "loss": "square", "sweep": [0.1, 0]})",
                                       {});
  CHECK(s.net.layer(0)(0, 1) == 1.0);
  CHECK(s.sweep.size() == 2);
}

TEST_CASE("scenario configs") {
  const auto p = parse_perturb_config(R"({"scenario": "toy_net", "repetitions": 2, "seed": 4})", {});
  CHECK(p.scenario == PerturbConfig::Scenario::toy_net);
  CHECK(p.toy.repetitions == 2);
  CHECK(p.seed() == 4);
  CHECK_THROWS_AS(parse_perturb_config(R"({"scenario": "cifar"})", {}), ConfigError);
  CHECK(parse_growth_config(R"({"layers": [1, 2]})", {}).layers == std::vector<int>{1, 2});
  CHECK(parse_sweep_config(R"({"max_degree": 90})", {}).max_degree == 90);
  CHECK(parse_direction_config(R"({"samples": 8})", {}).samples == 8);
}

TEST_CASE("config hash ignores formatting and the seed") {
  const auto a = config_hash(R"({"a": 1, "b": [1, 2], "seed": 5})");
  const auto b = config_hash("{\n  \"b\": [1,2],\n  \"a\": 1\n}");
  CHECK(a == b);
  CHECK(a != config_hash(R"({"a": 2, "b": [1, 2]})"));
}
