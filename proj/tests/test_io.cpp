// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>

#include "doctest.h"
#include "gradflow/io.hpp"
#include "support.hpp"

using namespace gradflow;
using namespace gradflow::testing;

TEST_CASE("shortest round-trip doubles") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  Rng rng(71);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
  CHECK(header_line(0xabcULL, 7) == "# config_hash=0000000000000abc seed=7\n");
}

TEST_CASE("net JSON round trip") {
  Rng rng(72);
  const std::vector<std::size_t> widths{3, 4, 2};
  const DeepNet net = DeepNet::random(widths, Activation::smoothed_relu(0.3), rng);
  CHECK(net_from_json(net_to_json(net)) == net);
  const DeepNet poly({Matrix{{1.5}}}, Activation::polynomial({0, 1, 0.5}), true);
  CHECK(net_from_json(net_to_json(poly)) == poly);
  CHECK_THROWS_AS(net_from_json("{\"layers\": []}"), IoError);
  CHECK_THROWS_AS(net_from_json("not json"), IoError);
}

TEST_CASE("dataset JSON round trip") {
  const Dataset d = binary_data({{1, 0.25}, {-1, 3}}, {1, -1});
  const Dataset back = dataset_from_json(dataset_to_json(d));
  CHECK(back.inputs == d.inputs);
  CHECK(back.labels == d.labels);
  CHECK(back.task == TaskKind::binary);
  CHECK_THROWS_AS(dataset_from_json("{\"inputs\": [[1]], \"labels\": [0.5], \"task\": \"binary\"}"), DataError);
}

TEST_CASE("trace CSV layout") {
  TrajectoryTrace t;
  TrajectoryRecord r;
  r.time = 0.5;
  r.loss = 2.0;
  r.layer_norms = {1.0, 3.0};
  t.records.push_back(r);
  const std::string csv = trace_csv(t, 2);
  CHECK(csv.rfind("time,loss,train_error,test_error,norm_l1,norm_l2,margin_cosine,nullspace_norm,residual_norm,"
                  "perturbation_count\n",
                  0) == 0);
  CHECK(csv.find("0.5,2,0,nan,1,3,nan,nan,nan,0\n") != std::string::npos);
}

TEST_CASE("spectrum CSV and verdict JSON") {
  SpectrumReport rep;
  rep.eigenvalues = {2.0, 0.0, -1.0};
  rep.zero_threshold = 1e-8;
  const std::string csv = spectrum_csv(rep);
  CHECK(csv.find("index,eigenvalue,class") == 0);
  CHECK(csv.find("0,2,stable") != std::string::npos);
  CHECK(csv.find("1,0,zero") != std::string::npos);
  CHECK(csv.find("2,-1,unstable") != std::string::npos);
}

TEST_CASE("file helpers report the path") {
  try {
    read_file("/nonexistent/dir/x.json");
    FAIL("expected an IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/dir/x.json") != std::string::npos);
  }
}
