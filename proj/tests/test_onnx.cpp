// Copyright 2026 The Influence Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include <doctest.h>
#include <json.hpp>

#include "influence/errors.hpp"
#include "influence/onnx.hpp"
#include "onnx.pb.h"
#include "support.hpp"

using namespace influence::onnx;
using influence::Errc;
using nlohmann::json;

namespace {

const std::filesystem::path kCases = testing::fixtures() / "onnx_cases";

Tensor decode(const json& j) {
  const Shape shape = j.at("shape").get<Shape>();
  const std::string kind = j.at("dtype");
  if (kind == "float") return Tensor::floats(shape, j.at("data").get<std::vector<float>>());
  if (kind == "bool") return Tensor::bools(shape, j.at("data").get<std::vector<std::int64_t>>());
  return Tensor::ints(shape, j.at("data").get<std::vector<std::int64_t>>());
}

void check_close(const Tensor& got, const Tensor& want, const std::string& what) {
  INFO(what);
  REQUIRE(got.shape == want.shape);
  REQUIRE(static_cast<int>(got.dtype) == static_cast<int>(want.dtype));
  if (want.dtype == DType::Float) {
    REQUIRE(got.f.size() == want.f.size());
    for (std::size_t k = 0; k < want.f.size(); ++k) {
      const double tol = 2e-6 + 2e-6 * std::fabs(want.f[k]);
      CHECK_MESSAGE(std::fabs(got.f[k] - want.f[k]) <= tol, what, " element ", k, ": ", got.f[k], " vs ", want.f[k]);
    }
  } else {
    CHECK(got.i == want.i);
  }
}

// A one-node graph built in memory.
struct Builder {
  ::onnx::ModelProto model;
  ::onnx::NodeProto* node;

  Builder(const std::string& op, std::vector<std::string> in, std::vector<std::string> out, std::int64_t opset = 14) {
    model.set_ir_version(8);
    auto* imp = model.add_opset_import();
    imp->set_domain("");
    imp->set_version(opset);
    auto* g = model.mutable_graph();
    g->set_name("g");
    node = g->add_node();
    node->set_op_type(op);
    node->set_name("n");
    for (const auto& n : in) {
      node->add_input(n);
      if (!n.empty()) g->add_input()->set_name(n);
    }
    for (const auto& n : out) {
      node->add_output(n);
      g->add_output()->set_name(n);
    }
  }
  std::string bytes() const { return model.SerializeAsString(); }
  std::unique_ptr<Model> load() const { return Model::parse(bytes()); }
};

}  // namespace

TEST_CASE("every operator case matches the reference runtime") {
  const json cases = json::parse(testing::slurp(kCases / "cases.json"));
  REQUIRE(cases.size() >= 100);
  for (const auto& [name, c] : cases.items()) {
    CAPTURE(name);
    const auto model = Model::load(kCases / (name + ".onnx"));
    CHECK(model->opset() == c.at("opset").get<std::int64_t>());
    std::vector<std::pair<std::string, Tensor>> feeds;
    for (const auto& [in, t] : c.at("inputs").items()) feeds.emplace_back(in, decode(t));
    std::vector<std::string> wanted;
    for (const auto& [out, _] : c.at("outputs").items()) wanted.push_back(out);
    const auto got = model->run(feeds, wanted);
    REQUIRE(got.size() == wanted.size());
    for (std::size_t k = 0; k < wanted.size(); ++k) check_close(got[k], decode(c.at("outputs").at(wanted[k])), name);
  }
}

TEST_CASE("the case set covers every supported operator") {
  const json cases = json::parse(testing::slurp(kCases / "cases.json"));
  std::set<std::string> seen;
  for (const auto& [name, _] : cases.items()) {
    ::onnx::ModelProto p;
    REQUIRE(p.ParseFromString(testing::slurp(kCases / (name + ".onnx"))));
    for (const auto& n : p.graph().node()) seen.insert(n.op_type());
  }
  const auto ops = supported_ops();
  for (const auto& op : ops) {
    if (op == "IsNaN") continue;  // checked below; NaN has no JSON spelling
    CHECK_MESSAGE(seen.count(op) == 1, op);
  }
  CHECK(std::is_sorted(ops.begin(), ops.end()));
}

TEST_CASE("IsNaN") {
  Builder b("IsNaN", {"x"}, {"y"});
  const auto m = b.load();
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const auto y = m->run({{"x", Tensor::floats({4}, {1.0f, nan, -nan, INFINITY})}}, {"y"});
  CHECK(y[0].dtype == DType::Bool);
  CHECK(y[0].i == std::vector<std::int64_t>{0, 1, 1, 0});
}

TEST_CASE("ReduceSum with empty axes can pass its input through") {
  Builder b("ReduceSum", {"x"}, {"y"}, 13);
  auto* a = b.node->add_attribute();
  a->set_name("noop_with_empty_axes");
  a->set_type(::onnx::AttributeProto::INT);
  a->set_i(1);
  const auto m = b.load();
  const Tensor x = Tensor::floats({2, 2}, {1, 2, 3, 4});
  const auto y = m->run({{"x", x}}, {"y"});
  CHECK(y[0].shape == x.shape);
  CHECK(y[0].f == x.f);
}

TEST_CASE("graph metadata") {
  Builder b("Add", {"a", "w"}, {"y"});
  auto* w = b.model.mutable_graph()->add_initializer();
  w->set_name("w");
  w->set_data_type(::onnx::TensorProto::FLOAT);
  w->add_dims(2);
  w->add_float_data(10);
  w->add_float_data(20);
  const auto m = b.load();
  // initializers listed as inputs are not feeds
  CHECK(m->inputs() == std::vector<std::string>{"a"});
  CHECK(m->outputs() == std::vector<std::string>{"y"});
  const auto y = m->run({{"a", Tensor::floats({2}, {1, 2})}}, {"y"});
  CHECK(y[0].f == std::vector<float>{11, 22});
}

TEST_CASE("raw and double initializers decode") {
  Builder b("Add", {"a", "w"}, {"y"});
  auto* w = b.model.mutable_graph()->add_initializer();
  w->set_name("w");
  w->set_data_type(::onnx::TensorProto::DOUBLE);
  w->add_dims(2);
  const double vals[2] = {0.5, -1.25};
  w->set_raw_data(std::string(reinterpret_cast<const char*>(vals), sizeof vals));
  const auto y = b.load()->run({{"a", Tensor::floats({2}, {1, 1})}}, {"y"});
  CHECK(y[0].f == std::vector<float>{1.5f, -0.25f});

  w->set_raw_data(std::string(3, '\0'));
  CHECK_ERRC(b.load(), Errc::ModelLoadFailure);
}

TEST_CASE("external tensor data") {
  testing::TempDir dir;
  const float vals[3] = {1, 2, 3};
  testing::spill(dir / "weights.bin", std::string("pad!") + std::string(reinterpret_cast<const char*>(vals), sizeof vals));
  Builder b("Mul", {"a", "w"}, {"y"});
  auto* w = b.model.mutable_graph()->add_initializer();
  w->set_name("w");
  w->set_data_type(::onnx::TensorProto::FLOAT);
  w->add_dims(3);
  w->set_data_location(::onnx::TensorProto::EXTERNAL);
  auto* kv = w->add_external_data();
  kv->set_key("location");
  kv->set_value("weights.bin");
  kv = w->add_external_data();
  kv->set_key("offset");
  kv->set_value("4");
  testing::spill(dir / "g.onnx", b.bytes());
  const auto y = Model::load(dir / "g.onnx")->run({{"a", Tensor::floats({3}, {2, 2, 2})}}, {"y"});
  CHECK(y[0].f == std::vector<float>{2, 4, 6});

  kv->set_value("8");  // runs past the end
  testing::spill(dir / "g.onnx", b.bytes());
  CHECK_ERRC(Model::load(dir / "g.onnx"), Errc::ModelLoadFailure);
}

TEST_CASE("load failures") {
  CHECK_ERRC(Model::parse("definitely not protobuf \xff\xff\xff"), Errc::ModelLoadFailure);
  CHECK_ERRC(Model::load(testing::fixtures() / "missing.onnx"), Errc::ModelLoadFailure);

  const auto message = [](const Builder& b) {
    try {
      b.load();
    } catch (const influence::Error& e) {
      CHECK(e.code() == Errc::ModelLoadFailure);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  Builder conv("Conv", {"x", "w"}, {"y"});
  CHECK(message(conv).find("Conv") != std::string::npos);

  Builder custom("FusedThing", {"x"}, {"y"});
  custom.node->set_domain("com.microsoft");
  CHECK(message(custom).find("com.microsoft.FusedThing") != std::string::npos);

  Builder known_op_other_domain("Add", {"a", "b"}, {"y"});
  known_op_other_domain.node->set_domain("com.example");
  CHECK(message(known_op_other_domain).find("com.example.Add") != std::string::npos);

  Builder no_default("Add", {"a", "b"}, {"y"});
  no_default.model.mutable_opset_import(0)->set_domain("com.example");
  CHECK(message(no_default).find("operator set") != std::string::npos);

  Builder dangling("Add", {"a", "b"}, {"y"});
  dangling.model.mutable_graph()->add_output()->set_name("ghost");
  CHECK(message(dangling).find("ghost") != std::string::npos);

  Builder loop("Loop", {"m", "c"}, {"y"});
  auto* body = loop.node->add_attribute();
  body->set_name("body");
  body->set_type(::onnx::AttributeProto::GRAPH);
  CHECK(message(loop).find("Loop") != std::string::npos);
}

TEST_CASE("inference failures") {
  Builder add("Add", {"a", "b"}, {"y"});
  const auto m = add.load();
  const Tensor two = Tensor::floats({2}, {1, 2});
  const Tensor three = Tensor::floats({3}, {1, 2, 3});
  CHECK_ERRC(m->run({{"a", two}, {"b", three}}, {"y"}), Errc::InferenceFailure);
  CHECK_ERRC(m->run({{"a", two}}, {"y"}), Errc::InferenceFailure);
  CHECK_ERRC(m->run({{"a", two}, {"b", two}, {"zz", two}}, {"y"}), Errc::InferenceFailure);
  CHECK_ERRC(m->run({{"a", two}, {"b", two}}, {"nope"}), Errc::InferenceFailure);
  try {
    m->run({{"a", two}, {"b", three}}, {"y"});
  } catch (const influence::Error& e) {
    // the failing node is named
    CHECK(std::string(e.what()).find("Add 'n'") != std::string::npos);
  }

  Builder mm("MatMul", {"a", "b"}, {"y"});
  CHECK_ERRC(mm.load()->run({{"a", Tensor::floats({2, 3}, std::vector<float>(6, 1))},
                             {"b", Tensor::floats({2, 3}, std::vector<float>(6, 1))}},
                            {"y"}),
             Errc::InferenceFailure);

  Builder gather("Gather", {"t", "i"}, {"y"});
  CHECK_ERRC(gather.load()->run({{"t", three}, {"i", Tensor::ints({1}, {3})}}, {"y"}), Errc::InferenceFailure);
  CHECK_ERRC(gather.load()->run({{"t", three}, {"i", Tensor::ints({1}, {-4})}}, {"y"}), Errc::InferenceFailure);

  Builder reshape("Reshape", {"x", "s"}, {"y"});
  CHECK_ERRC(reshape.load()->run({{"x", three}, {"s", Tensor::ints({1}, {2})}}, {"y"}), Errc::InferenceFailure);
}

TEST_CASE("concurrent runs agree with serial runs") {
  const auto m = Model::load(kCases / "layernorm.onnx");
  const json c = json::parse(testing::slurp(kCases / "cases.json")).at("layernorm");
  std::vector<std::pair<std::string, Tensor>> feeds;
  for (const auto& [in, t] : c.at("inputs").items()) feeds.emplace_back(in, decode(t));
  const Tensor serial = m->run(feeds, {"y0"}).front();
  std::vector<Tensor> results(8);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < results.size(); ++t) {
    pool.emplace_back([&, t] {
      for (int r = 0; r < 20; ++r) results[t] = m->run(feeds, {"y0"}).front();
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& r : results) CHECK(r.f == serial.f);
}
