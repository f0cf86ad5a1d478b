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

#include "influence/onnx.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <Eigen/Core>
#include <fmt/format.h>
#include <google/protobuf/io/coded_stream.h>
#include <google/protobuf/io/zero_copy_stream_impl_lite.h>

#include "influence/errors.hpp"
#include "onnx.pb.h"

namespace influence::onnx {

namespace fs = std::filesystem;

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

Tensor Tensor::floats(Shape shape, std::vector<float> values) {
  Tensor t;
  t.dtype = DType::Float;
  t.shape = std::move(shape);
  t.f = std::move(values);
  return t;
}

Tensor Tensor::ints(Shape shape, std::vector<std::int64_t> values) {
  Tensor t;
  t.dtype = DType::Int64;
  t.shape = std::move(shape);
  t.i = std::move(values);
  return t;
}

Tensor Tensor::bools(Shape shape, std::vector<std::int64_t> values) {
  Tensor t = ints(std::move(shape), std::move(values));
  t.dtype = DType::Bool;
  return t;
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(Errc::InferenceFailure, msg); }

// ---------------------------------------------------------------- attributes

struct Attr {
  std::int64_t i = 0;
  float f = 0.0f;
  std::string s;
  std::vector<std::int64_t> ints;
  std::vector<float> floats;
  std::shared_ptr<Tensor> t;
};

struct Node;
struct Ctx {
  std::int64_t opset;
};
using Inputs = std::vector<const Tensor*>;
using OpFn = void (*)(const Node&, const Ctx&, const Inputs&, std::vector<Tensor>&);

struct Node {
  std::string op;
  std::string name;
  std::vector<int> in;   // slot per input, -1 when omitted
  std::vector<int> out;  // slot per output, -1 when omitted
  std::map<std::string, Attr, std::less<>> attrs;
  OpFn fn = nullptr;

  const Attr* attr(std::string_view key) const {
    const auto it = attrs.find(key);
    return it == attrs.end() ? nullptr : &it->second;
  }
  std::int64_t int_attr(std::string_view key, std::int64_t fallback) const {
    const Attr* a = attr(key);
    return a ? a->i : fallback;
  }
  float float_attr(std::string_view key, float fallback) const {
    const Attr* a = attr(key);
    return a ? a->f : fallback;
  }
};

// ---------------------------------------------------------------- helpers

const Tensor& need(const Inputs& in, std::size_t k, const Node& n) {
  if (k >= in.size() || in[k] == nullptr) fail(fmt::format("{} '{}': missing input {}", n.op, n.name, k));
  return *in[k];
}

const Tensor* opt(const Inputs& in, std::size_t k) { return k < in.size() ? in[k] : nullptr; }

std::vector<std::int64_t> as_ints(const Tensor& t) {
  if (t.dtype == DType::Float) {
    std::vector<std::int64_t> out;
    for (float v : t.f) out.push_back(static_cast<std::int64_t>(v));
    return out;
  }
  return t.i;
}

double scalar(const Tensor& t) {
  if (t.size() != 1) fail("expected a scalar tensor");
  return t.dtype == DType::Float ? static_cast<double>(t.f[0]) : static_cast<double>(t.i[0]);
}

std::int64_t norm_axis(std::int64_t axis, std::size_t rank, const Node& n) {
  const auto r = static_cast<std::int64_t>(rank);
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) fail(fmt::format("{} '{}': axis out of range", n.op, n.name));
  return axis;
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) s[k - 1] = s[k] * static_cast<std::size_t>(shape[k]);
  return s;
}

std::size_t prod(const Shape& shape, std::size_t from, std::size_t to) {
  std::size_t n = 1;
  for (std::size_t k = from; k < to; ++k) n *= static_cast<std::size_t>(shape[k]);
  return n;
}

Shape broadcast(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t k = 0; k < r; ++k) {
    const std::int64_t da = k < r - a.size() ? 1 : a[k - (r - a.size())];
    const std::int64_t db = k < r - b.size() ? 1 : b[k - (r - b.size())];
    if (da != db && da != 1 && db != 1) fail("shapes cannot be broadcast");
    out[k] = da == 1 ? db : da;
  }
  return out;
}

// Strides of `in` viewed at the rank of `out`, 0 on broadcast axes.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> s(out.size(), 0);
  const auto own = strides_of(in);
  const std::size_t shift = out.size() - in.size();
  for (std::size_t k = 0; k < in.size(); ++k) s[k + shift] = in[k] == 1 ? 0 : own[k];
  return s;
}

// Calls fn(out_index, offsets...) for every element of `out`.
template <std::size_t N, typename Fn>
void for_each_broadcast(const Shape& out, const std::array<const Shape*, N>& ins, Fn&& fn) {
  const std::size_t total = element_count(out);
  if (total == 0) return;
  std::array<std::vector<std::size_t>, N> st;
  for (std::size_t k = 0; k < N; ++k) st[k] = broadcast_strides(*ins[k], out);
  const std::size_t rank = out.size();
  std::vector<std::int64_t> idx(rank, 0);
  std::array<std::size_t, N> off{};
  for (std::size_t o = 0; o < total; ++o) {
    fn(o, off);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out[d]) {
        for (std::size_t k = 0; k < N; ++k) off[k] += st[k][d];
        break;
      }
      for (std::size_t k = 0; k < N; ++k) off[k] -= st[k][d] * static_cast<std::size_t>(out[d] - 1);
      idx[d] = 0;
    }
  }
}

template <typename T>
std::vector<T>& data(Tensor& t);
template <>
std::vector<float>& data<float>(Tensor& t) {
  return t.f;
}
template <>
std::vector<std::int64_t>& data<std::int64_t>(Tensor& t) {
  return t.i;
}
template <typename T>
const std::vector<T>& cdata(const Tensor& t) {
  return data<T>(const_cast<Tensor&>(t));
}

Tensor like(const Tensor& proto, Shape shape) {
  Tensor t;
  t.dtype = proto.dtype;
  t.shape = std::move(shape);
  if (t.dtype == DType::Float) {
    t.f.resize(t.size());
  } else {
    t.i.resize(t.size());
  }
  return t;
}

// ---------------------------------------------------------------- elementwise

template <typename R, typename T, typename F>
void binary_typed(const Tensor& a, const Tensor& b, Tensor& out, F f) {
  const auto& x = cdata<T>(a);
  const auto& y = cdata<T>(b);
  auto& z = data<R>(out);
  if (a.shape == b.shape) {
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = f(x[k], y[k]);
  } else if (b.size() == 1) {
    const T s = y[0];
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = f(x[k], s);
  } else {
    for_each_broadcast<2>(out.shape, {&a.shape, &b.shape},
                          [&](std::size_t o, const auto& off) { z[o] = f(x[off[0]], y[off[1]]); });
  }
}

enum class BinKind { Arith, Compare, Logic };

template <BinKind K, typename FF, typename FI>
Tensor binary(const Tensor& a, const Tensor& b, FF ff, FI fi) {
  if ((a.dtype == DType::Float) != (b.dtype == DType::Float)) fail("binary operator on mixed element types");
  Tensor out;
  out.shape = broadcast(a.shape, b.shape);
  if constexpr (K == BinKind::Arith) {
    out.dtype = a.dtype;
    if (a.dtype == DType::Float) {
      out.f.resize(out.size());
      binary_typed<float, float>(a, b, out, ff);
    } else {
      out.i.resize(out.size());
      binary_typed<std::int64_t, std::int64_t>(a, b, out, fi);
    }
  } else {
    out.dtype = DType::Bool;
    out.i.resize(out.size());
    if (a.dtype == DType::Float) {
      binary_typed<std::int64_t, float>(a, b, out, ff);
    } else {
      binary_typed<std::int64_t, std::int64_t>(a, b, out, fi);
    }
  }
  return out;
}

#define ARITH(NAME, EXPR)                                                                         \
  void op_##NAME(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {         \
    out[0] = binary<BinKind::Arith>(                                                              \
        need(in, 0, n), need(in, 1, n), [](float a, float b) -> float { return EXPR; },           \
        [](std::int64_t a, std::int64_t b) -> std::int64_t { return EXPR; });                     \
  }

ARITH(Add, a + b)
ARITH(Sub, a - b)
ARITH(Mul, a * b)

void op_Div(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  out[0] = binary<BinKind::Arith>(
      need(in, 0, n), need(in, 1, n), [](float a, float b) { return a / b; },
      [](std::int64_t a, std::int64_t b) -> std::int64_t {
        if (b == 0) fail("integer division by zero");
        return a / b;
      });
}

void op_Pow(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& a = need(in, 0, n);
  Tensor b = need(in, 1, n);
  // The exponent may have another element type than the base.
  if ((a.dtype == DType::Float) != (b.dtype == DType::Float)) {
    if (a.dtype == DType::Float) {
      b = Tensor::floats(b.shape, std::vector<float>(b.i.begin(), b.i.end()));
    } else {
      std::vector<std::int64_t> v;
      for (float x : b.f) v.push_back(static_cast<std::int64_t>(x));
      b = Tensor::ints(b.shape, std::move(v));
    }
  }
  out[0] = binary<BinKind::Arith>(
      a, b, [](float x, float y) { return std::pow(x, y); },
      [](std::int64_t x, std::int64_t y) { return static_cast<std::int64_t>(std::pow(x, y)); });
}

#define COMPARE(NAME, EXPR)                                                                       \
  void op_##NAME(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {         \
    out[0] = binary<BinKind::Compare>(                                                            \
        need(in, 0, n), need(in, 1, n), [](float a, float b) -> std::int64_t { return EXPR; },    \
        [](std::int64_t a, std::int64_t b) -> std::int64_t { return EXPR; });                     \
  }

COMPARE(Equal, a == b)
COMPARE(Less, a < b)
COMPARE(Greater, a > b)
COMPARE(LessOrEqual, a <= b)
COMPARE(GreaterOrEqual, a >= b)
COMPARE(And, (a != 0) && (b != 0))
COMPARE(Or, (a != 0) || (b != 0))

template <typename FF, typename FI>
void variadic(const Node& n, const Inputs& in, std::vector<Tensor>& out, FF ff, FI fi) {
  Tensor acc = need(in, 0, n);
  for (std::size_t k = 1; k < in.size(); ++k) acc = binary<BinKind::Arith>(acc, need(in, k, n), ff, fi);
  out[0] = std::move(acc);
}

void op_Min(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  variadic(
      n, in, out, [](float a, float b) { return std::isnan(a) || std::isnan(b) ? NAN : std::min(a, b); },
      [](std::int64_t a, std::int64_t b) { return std::min(a, b); });
}

void op_Max(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  variadic(
      n, in, out, [](float a, float b) { return std::isnan(a) || std::isnan(b) ? NAN : std::max(a, b); },
      [](std::int64_t a, std::int64_t b) { return std::max(a, b); });
}

template <typename FF>
void unary_float(const Node& n, const Inputs& in, std::vector<Tensor>& out, FF f) {
  const Tensor& x = need(in, 0, n);
  if (x.dtype != DType::Float) fail(fmt::format("{} '{}' expects a float tensor", n.op, n.name));
  Tensor y = like(x, x.shape);
  for (std::size_t k = 0; k < y.f.size(); ++k) y.f[k] = f(x.f[k]);
  out[0] = std::move(y);
}

#define UNARY(NAME, EXPR)                                                                  \
  void op_##NAME(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {  \
    unary_float(n, in, out, [](float x) -> float { return EXPR; });                        \
  }

UNARY(Log, std::log(x))
UNARY(Exp, std::exp(x))
UNARY(Erf, std::erf(x))
UNARY(Tanh, std::tanh(x))
UNARY(Sqrt, std::sqrt(x))
UNARY(Relu, x > 0.0f ? x : 0.0f)
UNARY(Sigmoid, 1.0f / (1.0f + std::exp(-x)))
UNARY(Floor, std::floor(x))
UNARY(Ceil, std::ceil(x))
UNARY(Reciprocal, 1.0f / x)

void op_Gelu(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Attr* a = n.attr("approximate");
  if (a != nullptr && a->s == "tanh") {
    unary_float(n, in, out, [](float x) {
      const float c = std::sqrt(2.0f / static_cast<float>(M_PI));
      return 0.5f * x * (1.0f + std::tanh(c * (x + 0.044715f * x * x * x)));
    });
  } else {
    unary_float(n, in, out, [](float x) { return 0.5f * x * (1.0f + std::erf(x / std::sqrt(2.0f))); });
  }
}

void op_Neg(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  Tensor y = need(in, 0, n);
  for (auto& v : y.f) v = -v;
  for (auto& v : y.i) v = -v;
  out[0] = std::move(y);
}

void op_Abs(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  Tensor y = need(in, 0, n);
  for (auto& v : y.f) v = std::fabs(v);
  for (auto& v : y.i) v = v < 0 ? -v : v;
  out[0] = std::move(y);
}

void op_Not(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  Tensor y = need(in, 0, n);
  for (auto& v : y.i) v = v == 0 ? 1 : 0;
  y.dtype = DType::Bool;
  out[0] = std::move(y);
}

void op_IsNaN(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  std::vector<std::int64_t> v(x.size(), 0);
  if (x.dtype == DType::Float) {
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::isnan(x.f[k]) ? 1 : 0;
  }
  out[0] = Tensor::bools(x.shape, std::move(v));
}

void op_Clip(const Node& n, const Ctx& ctx, const Inputs& in, std::vector<Tensor>& out) {
  Tensor y = need(in, 0, n);
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  if (ctx.opset < 11) {
    lo = n.float_attr("min", -std::numeric_limits<float>::max());
    hi = n.float_attr("max", std::numeric_limits<float>::max());
  } else {
    if (const Tensor* t = opt(in, 1)) lo = scalar(*t);
    if (const Tensor* t = opt(in, 2)) hi = scalar(*t);
  }
  for (auto& v : y.f) v = static_cast<float>(std::clamp(static_cast<double>(v), lo, hi));
  for (auto& v : y.i) {
    if (static_cast<double>(v) < lo) v = static_cast<std::int64_t>(lo);
    if (static_cast<double>(v) > hi) v = static_cast<std::int64_t>(hi);
  }
  out[0] = std::move(y);
}

void op_Where(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& c = need(in, 0, n);
  const Tensor& x = need(in, 1, n);
  const Tensor& y = need(in, 2, n);
  if ((x.dtype == DType::Float) != (y.dtype == DType::Float)) fail("Where on mixed element types");
  Tensor r = like(x, broadcast(c.shape, broadcast(x.shape, y.shape)));
  r.dtype = x.dtype;
  const auto& cv = c.dtype == DType::Float ? std::vector<std::int64_t>() : c.i;
  if (c.dtype == DType::Float) fail("Where condition must be boolean");
  if (x.dtype == DType::Float) {
    for_each_broadcast<3>(r.shape, {&c.shape, &x.shape, &y.shape}, [&](std::size_t o, const auto& off) {
      r.f[o] = cv[off[0]] != 0 ? x.f[off[1]] : y.f[off[2]];
    });
  } else {
    for_each_broadcast<3>(r.shape, {&c.shape, &x.shape, &y.shape}, [&](std::size_t o, const auto& off) {
      r.i[o] = cv[off[0]] != 0 ? x.i[off[1]] : y.i[off[2]];
    });
  }
  out[0] = std::move(r);
}

// ONNX TensorProto element types.
constexpr int kFloat = 1;
constexpr int kInt32 = 6;
constexpr int kInt64 = 7;
constexpr int kBool = 9;
constexpr int kDouble = 11;
constexpr int kInt8 = 3;
constexpr int kUint8 = 2;
constexpr int kInt16 = 5;

Tensor cast_to(const Tensor& x, std::int64_t to) {
  Tensor y;
  y.shape = x.shape;
  switch (to) {
    case kFloat:
    case kDouble:
      y.dtype = DType::Float;
      if (x.dtype == DType::Float) {
        y.f = x.f;
      } else {
        y.f.assign(x.i.begin(), x.i.end());
      }
      return y;
    case kInt64:
    case kInt32:
    case kInt16:
    case kInt8:
    case kUint8:
      y.dtype = DType::Int64;
      if (x.dtype == DType::Float) {
        for (float v : x.f) y.i.push_back(static_cast<std::int64_t>(v));
      } else {
        y.i = x.i;
      }
      if (to == kInt32) {
        for (auto& v : y.i) v = static_cast<std::int32_t>(v);
      }
      return y;
    case kBool:
      y.dtype = DType::Bool;
      if (x.dtype == DType::Float) {
        for (float v : x.f) y.i.push_back(v != 0.0f ? 1 : 0);
      } else {
        for (auto v : x.i) y.i.push_back(v != 0 ? 1 : 0);
      }
      return y;
    default:
      fail(fmt::format("Cast to element type {} is not supported", to));
  }
}

void op_Cast(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  out[0] = cast_to(need(in, 0, n), n.int_attr("to", kFloat));
}

// ---------------------------------------------------------------- shape ops

void op_Identity(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) { out[0] = need(in, 0, n); }

void op_Dropout(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  out[0] = need(in, 0, n);
  if (out.size() > 1) out[1] = Tensor::bools(out[0].shape, std::vector<std::int64_t>(out[0].size(), 1));
}

void op_Shape(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Shape& s = need(in, 0, n).shape;
  const auto r = static_cast<std::int64_t>(s.size());
  auto clampi = [&](std::int64_t v) { return std::clamp(v < 0 ? v + r : v, std::int64_t{0}, r); };
  const std::int64_t start = clampi(n.int_attr("start", 0));
  const std::int64_t end = clampi(n.int_attr("end", r));
  std::vector<std::int64_t> v;
  for (std::int64_t k = start; k < end; ++k) v.push_back(s[static_cast<std::size_t>(k)]);
  const auto len = static_cast<std::int64_t>(v.size());
  out[0] = Tensor::ints({len}, std::move(v));
}

void op_Constant(const Node& n, const Ctx&, const Inputs&, std::vector<Tensor>& out) {
  if (const Attr* a = n.attr("value")) {
    out[0] = *a->t;
  } else if (const Attr* a = n.attr("value_float")) {
    out[0] = Tensor::floats({}, {a->f});
  } else if (const Attr* a = n.attr("value_floats")) {
    out[0] = Tensor::floats({static_cast<std::int64_t>(a->floats.size())}, a->floats);
  } else if (const Attr* a = n.attr("value_int")) {
    out[0] = Tensor::ints({}, {a->i});
  } else if (const Attr* a = n.attr("value_ints")) {
    out[0] = Tensor::ints({static_cast<std::int64_t>(a->ints.size())}, a->ints);
  } else {
    fail(fmt::format("Constant '{}' has no supported value attribute", n.name));
  }
}

void op_ConstantOfShape(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  Shape shape = as_ints(need(in, 0, n));
  const Attr* a = n.attr("value");
  if (a == nullptr) {
    out[0] = Tensor::floats(shape, std::vector<float>(element_count(shape), 0.0f));
    return;
  }
  Tensor t = like(*a->t, shape);
  if (t.dtype == DType::Float) {
    std::fill(t.f.begin(), t.f.end(), a->t->f.at(0));
  } else {
    std::fill(t.i.begin(), t.i.end(), a->t->i.at(0));
  }
  out[0] = std::move(t);
}

Tensor reshaped(Tensor t, Shape shape) {
  t.shape = std::move(shape);
  return t;
}

void op_Reshape(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  Shape shape = as_ints(need(in, 1, n));
  const bool allowzero = n.int_attr("allowzero", 0) != 0;
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (shape[k] == 0 && !allowzero) {
      if (k >= x.shape.size()) fail(fmt::format("Reshape '{}': zero dim beyond input rank", n.name));
      shape[k] = x.shape[k];
    }
    if (shape[k] == -1) {
      if (infer >= 0) fail(fmt::format("Reshape '{}': two inferred dims", n.name));
      infer = static_cast<int>(k);
    } else {
      known *= shape[k];
    }
  }
  if (infer >= 0) shape[static_cast<std::size_t>(infer)] = known == 0 ? 0 : static_cast<std::int64_t>(x.size()) / known;
  if (element_count(shape) != x.size()) fail(fmt::format("Reshape '{}': element count changes", n.name));
  out[0] = reshaped(x, std::move(shape));
}

void op_Flatten(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  std::int64_t axis = n.int_attr("axis", 1);
  if (axis < 0) axis += static_cast<std::int64_t>(x.shape.size());
  const auto a = static_cast<std::size_t>(axis);
  out[0] = reshaped(x, {static_cast<std::int64_t>(prod(x.shape, 0, a)),
                        static_cast<std::int64_t>(prod(x.shape, a, x.shape.size()))});
}

std::vector<std::int64_t> axes_input_or_attr(const Node& n, const Inputs& in, std::size_t slot) {
  if (const Tensor* t = opt(in, slot)) return as_ints(*t);
  if (const Attr* a = n.attr("axes")) return a->ints;
  return {};
}

void op_Unsqueeze(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  auto axes = axes_input_or_attr(n, in, 1);
  const std::size_t rank = x.shape.size() + axes.size();
  for (auto& a : axes) a = norm_axis(a, rank, n);
  std::sort(axes.begin(), axes.end());
  Shape shape;
  std::size_t src = 0;
  for (std::size_t k = 0; k < rank; ++k) {
    if (std::binary_search(axes.begin(), axes.end(), static_cast<std::int64_t>(k))) {
      shape.push_back(1);
    } else {
      shape.push_back(x.shape[src++]);
    }
  }
  out[0] = reshaped(x, std::move(shape));
}

void op_Squeeze(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  auto axes = axes_input_or_attr(n, in, 1);
  for (auto& a : axes) a = norm_axis(a, x.shape.size(), n);
  Shape shape;
  for (std::size_t k = 0; k < x.shape.size(); ++k) {
    const bool listed = std::find(axes.begin(), axes.end(), static_cast<std::int64_t>(k)) != axes.end();
    if (axes.empty() ? x.shape[k] == 1 : listed) continue;
    shape.push_back(x.shape[k]);
  }
  out[0] = reshaped(x, std::move(shape));
}

template <typename T>
void expand_typed(const Tensor& x, Tensor& y) {
  const auto& src = cdata<T>(x);
  auto& dst = data<T>(y);
  for_each_broadcast<1>(y.shape, {&x.shape}, [&](std::size_t o, const auto& off) { dst[o] = src[off[0]]; });
}

void op_Expand(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  Tensor y = like(x, broadcast(x.shape, as_ints(need(in, 1, n))));
  if (x.dtype == DType::Float) {
    expand_typed<float>(x, y);
  } else {
    expand_typed<std::int64_t>(x, y);
  }
  out[0] = std::move(y);
}

template <typename T>
void concat_typed(const std::vector<const Tensor*>& xs, std::size_t axis, Tensor& y) {
  auto& dst = data<T>(y);
  const std::size_t outer = prod(y.shape, 0, axis);
  std::size_t pos = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    for (const Tensor* x : xs) {
      const std::size_t block = prod(x->shape, axis, x->shape.size());
      const auto& src = cdata<T>(*x);
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * block), block, dst.begin() + static_cast<std::ptrdiff_t>(pos));
      pos += block;
    }
  }
}

void op_Concat(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  std::vector<const Tensor*> xs;
  for (std::size_t k = 0; k < in.size(); ++k) xs.push_back(&need(in, k, n));
  const auto axis = static_cast<std::size_t>(norm_axis(n.int_attr("axis", 0), xs[0]->shape.size(), n));
  Shape shape = xs[0]->shape;
  shape[axis] = 0;
  for (const Tensor* x : xs) {
    if (x->shape.size() != shape.size()) fail(fmt::format("Concat '{}': rank mismatch", n.name));
    shape[axis] += x->shape[axis];
  }
  Tensor y = like(*xs[0], shape);
  if (y.dtype == DType::Float) {
    concat_typed<float>(xs, axis, y);
  } else {
    concat_typed<std::int64_t>(xs, axis, y);
  }
  out[0] = std::move(y);
}

template <typename T>
void split_typed(const Tensor& x, std::size_t axis, const std::vector<std::int64_t>& sizes, std::vector<Tensor>& out) {
  const std::size_t outer = prod(x.shape, 0, axis);
  const std::size_t inner = prod(x.shape, axis + 1, x.shape.size());
  const auto& src = cdata<T>(x);
  std::size_t begin = 0;
  for (std::size_t p = 0; p < sizes.size(); ++p) {
    Shape shape = x.shape;
    shape[axis] = sizes[p];
    Tensor y = like(x, shape);
    auto& dst = data<T>(y);
    const std::size_t block = static_cast<std::size_t>(sizes[p]) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t from = (o * static_cast<std::size_t>(x.shape[axis]) + begin) * inner;
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), block, dst.begin() + static_cast<std::ptrdiff_t>(o * block));
    }
    begin += static_cast<std::size_t>(sizes[p]);
    if (p < out.size()) out[p] = std::move(y);
  }
}

void op_Split(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  const auto axis = static_cast<std::size_t>(norm_axis(n.int_attr("axis", 0), x.shape.size(), n));
  std::vector<std::int64_t> sizes;
  if (const Tensor* s = opt(in, 1)) {
    sizes = as_ints(*s);
  } else if (const Attr* a = n.attr("split")) {
    sizes = a->ints;
  } else {
    const auto parts = static_cast<std::int64_t>(n.int_attr("num_outputs", static_cast<std::int64_t>(out.size())));
    const std::int64_t dim = x.shape[axis];
    const std::int64_t chunk = (dim + parts - 1) / parts;
    for (std::int64_t k = 0; k < parts; ++k) sizes.push_back(std::min(chunk, dim - k * chunk));
  }
  if (x.dtype == DType::Float) {
    split_typed<float>(x, axis, sizes, out);
  } else {
    split_typed<std::int64_t>(x, axis, sizes, out);
  }
}

template <typename T>
void gather_typed(const Tensor& x, const std::vector<std::int64_t>& idx, std::size_t axis, Tensor& y) {
  const std::size_t outer = prod(x.shape, 0, axis);
  const std::size_t inner = prod(x.shape, axis + 1, x.shape.size());
  const auto dim = x.shape[axis];
  const auto& src = cdata<T>(x);
  auto& dst = data<T>(y);
  std::size_t pos = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::int64_t j : idx) {
      if (j < 0) j += dim;
      if (j < 0 || j >= dim) fail("Gather index out of range");
      const std::size_t from = (o * static_cast<std::size_t>(dim) + static_cast<std::size_t>(j)) * inner;
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), inner, dst.begin() + static_cast<std::ptrdiff_t>(pos));
      pos += inner;
    }
  }
}

void op_Gather(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  const Tensor& ind = need(in, 1, n);
  const auto axis = static_cast<std::size_t>(norm_axis(n.int_attr("axis", 0), x.shape.size(), n));
  Shape shape(x.shape.begin(), x.shape.begin() + static_cast<std::ptrdiff_t>(axis));
  shape.insert(shape.end(), ind.shape.begin(), ind.shape.end());
  shape.insert(shape.end(), x.shape.begin() + static_cast<std::ptrdiff_t>(axis) + 1, x.shape.end());
  Tensor y = like(x, shape);
  const auto idx = as_ints(ind);
  if (x.dtype == DType::Float) {
    gather_typed<float>(x, idx, axis, y);
  } else {
    gather_typed<std::int64_t>(x, idx, axis, y);
  }
  out[0] = std::move(y);
}

template <typename T>
void gather_elements_typed(const Tensor& x, const Tensor& ind, std::size_t axis, Tensor& y) {
  const auto xs = strides_of(x.shape);
  const auto& src = cdata<T>(x);
  auto& dst = data<T>(y);
  const auto idx = as_ints(ind);
  std::vector<std::int64_t> pos(ind.shape.size(), 0);
  for (std::size_t o = 0; o < idx.size(); ++o) {
    std::size_t from = 0;
    for (std::size_t d = 0; d < pos.size(); ++d) {
      std::int64_t v = d == axis ? idx[o] : pos[d];
      if (v < 0) v += x.shape[d];
      if (v < 0 || v >= x.shape[d]) fail("GatherElements index out of range");
      from += static_cast<std::size_t>(v) * xs[d];
    }
    dst[o] = src[from];
    for (std::size_t d = pos.size(); d-- > 0;) {
      if (++pos[d] < ind.shape[d]) break;
      pos[d] = 0;
    }
  }
}

void op_GatherElements(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  const Tensor& ind = need(in, 1, n);
  const auto axis = static_cast<std::size_t>(norm_axis(n.int_attr("axis", 0), x.shape.size(), n));
  Tensor y = like(x, ind.shape);
  if (x.dtype == DType::Float) {
    gather_elements_typed<float>(x, ind, axis, y);
  } else {
    gather_elements_typed<std::int64_t>(x, ind, axis, y);
  }
  out[0] = std::move(y);
}

template <typename T>
void gather_nd_typed(const Tensor& x, const Tensor& ind, std::size_t batch, Tensor& y) {
  const auto idx = as_ints(ind);
  const std::size_t k = static_cast<std::size_t>(ind.shape.back());
  const std::size_t batches = prod(x.shape, 0, batch);
  const std::size_t per_batch = prod(ind.shape, batch, ind.shape.size() - 1);
  const std::size_t slice = prod(x.shape, batch + k, x.shape.size());
  const auto xs = strides_of(x.shape);
  const std::size_t batch_stride = batch == 0 ? 0 : xs[batch - 1];
  const auto& src = cdata<T>(x);
  auto& dst = data<T>(y);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t q = 0; q < per_batch; ++q) {
      std::size_t from = b * batch_stride;
      for (std::size_t d = 0; d < k; ++d) {
        std::int64_t v = idx[(b * per_batch + q) * k + d];
        const auto dim = x.shape[batch + d];
        if (v < 0) v += dim;
        if (v < 0 || v >= dim) fail("GatherND index out of range");
        from += static_cast<std::size_t>(v) * xs[batch + d];
      }
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), slice, dst.begin() + static_cast<std::ptrdiff_t>(pos));
      pos += slice;
    }
  }
}

void op_GatherND(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  const Tensor& ind = need(in, 1, n);
  const auto batch = static_cast<std::size_t>(n.int_attr("batch_dims", 0));
  const auto k = static_cast<std::size_t>(ind.shape.back());
  Shape shape(ind.shape.begin(), ind.shape.end() - 1);
  shape.insert(shape.end(), x.shape.begin() + static_cast<std::ptrdiff_t>(batch + k), x.shape.end());
  Tensor y = like(x, shape);
  if (x.dtype == DType::Float) {
    gather_nd_typed<float>(x, ind, batch, y);
  } else {
    gather_nd_typed<std::int64_t>(x, ind, batch, y);
  }
  out[0] = std::move(y);
}

template <typename T>
void strided_copy(const Tensor& x, const std::vector<std::int64_t>& start, const std::vector<std::int64_t>& step,
                  Tensor& y) {
  const auto xs = strides_of(x.shape);
  const auto& src = cdata<T>(x);
  auto& dst = data<T>(y);
  const std::size_t total = y.size();
  std::vector<std::int64_t> pos(y.shape.size(), 0);
  for (std::size_t o = 0; o < total; ++o) {
    std::size_t from = 0;
    for (std::size_t d = 0; d < pos.size(); ++d) from += static_cast<std::size_t>(start[d] + pos[d] * step[d]) * xs[d];
    dst[o] = src[from];
    for (std::size_t d = pos.size(); d-- > 0;) {
      if (++pos[d] < y.shape[d]) break;
      pos[d] = 0;
    }
  }
}

void op_Slice(const Node& n, const Ctx& ctx, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  std::vector<std::int64_t> starts, ends, axes, steps;
  if (ctx.opset < 10) {
    starts = n.attr("starts") ? n.attr("starts")->ints : std::vector<std::int64_t>{};
    ends = n.attr("ends") ? n.attr("ends")->ints : std::vector<std::int64_t>{};
    if (const Attr* a = n.attr("axes")) axes = a->ints;
  } else {
    starts = as_ints(need(in, 1, n));
    ends = as_ints(need(in, 2, n));
    if (const Tensor* t = opt(in, 3)) axes = as_ints(*t);
    if (const Tensor* t = opt(in, 4)) steps = as_ints(*t);
  }
  if (axes.empty()) {
    axes.resize(starts.size());
    std::iota(axes.begin(), axes.end(), 0);
  }
  if (steps.empty()) steps.assign(starts.size(), 1);
  const std::size_t rank = x.shape.size();
  std::vector<std::int64_t> b(rank, 0), s(rank, 1);
  Shape shape = x.shape;
  for (std::size_t k = 0; k < axes.size(); ++k) {
    const auto ax = static_cast<std::size_t>(norm_axis(axes[k], rank, n));
    const std::int64_t dim = x.shape[ax];
    const std::int64_t step = steps[k];
    if (step == 0) fail(fmt::format("Slice '{}': zero step", n.name));
    std::int64_t st = starts[k];
    std::int64_t en = ends[k];
    if (st < 0) st = st < -dim ? 0 : st + dim;
    if (en < 0) en = en < -dim ? -1 : en + dim;
    std::int64_t count = 0;
    if (step > 0) {
      st = std::clamp<std::int64_t>(st, 0, dim);
      en = std::clamp<std::int64_t>(en, 0, dim);
      count = en > st ? (en - st + step - 1) / step : 0;
    } else {
      st = std::clamp<std::int64_t>(st, 0, dim - 1);
      en = std::clamp<std::int64_t>(en, -1, dim - 1);
      count = st > en ? (st - en - step - 1) / -step : 0;
    }
    b[ax] = st;
    s[ax] = step;
    shape[ax] = count;
  }
  Tensor y = like(x, shape);
  if (x.dtype == DType::Float) {
    strided_copy<float>(x, b, s, y);
  } else {
    strided_copy<std::int64_t>(x, b, s, y);
  }
  out[0] = std::move(y);
}

template <typename T>
void transpose_typed(const Tensor& x, const std::vector<std::int64_t>& perm, Tensor& y) {
  const auto xs = strides_of(x.shape);
  std::vector<std::size_t> st(perm.size());
  for (std::size_t d = 0; d < perm.size(); ++d) st[d] = xs[static_cast<std::size_t>(perm[d])];
  const auto& src = cdata<T>(x);
  auto& dst = data<T>(y);
  std::vector<std::int64_t> pos(perm.size(), 0);
  std::size_t from = 0;
  for (std::size_t o = 0; o < dst.size(); ++o) {
    dst[o] = src[from];
    for (std::size_t d = pos.size(); d-- > 0;) {
      if (++pos[d] < y.shape[d]) {
        from += st[d];
        break;
      }
      from -= st[d] * static_cast<std::size_t>(y.shape[d] - 1);
      pos[d] = 0;
    }
  }
}

void op_Transpose(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  std::vector<std::int64_t> perm;
  if (const Attr* a = n.attr("perm")) {
    perm = a->ints;
  } else {
    for (std::size_t d = x.shape.size(); d-- > 0;) perm.push_back(static_cast<std::int64_t>(d));
  }
  Shape shape;
  for (auto p : perm) shape.push_back(x.shape[static_cast<std::size_t>(p)]);
  Tensor y = like(x, shape);
  if (x.size() == 0) {
    out[0] = std::move(y);
    return;
  }
  if (x.dtype == DType::Float) {
    transpose_typed<float>(x, perm, y);
  } else {
    transpose_typed<std::int64_t>(x, perm, y);
  }
  out[0] = std::move(y);
}

void op_Range(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& start = need(in, 0, n);
  const double s = scalar(start);
  const double l = scalar(need(in, 1, n));
  const double d = scalar(need(in, 2, n));
  if (d == 0) fail(fmt::format("Range '{}': zero delta", n.name));
  const auto count = static_cast<std::int64_t>(std::max(0.0, std::ceil((l - s) / d)));
  if (start.dtype == DType::Float) {
    std::vector<float> v(static_cast<std::size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) v[static_cast<std::size_t>(k)] = static_cast<float>(s + static_cast<double>(k) * d);
    out[0] = Tensor::floats({count}, std::move(v));
  } else {
    std::vector<std::int64_t> v(static_cast<std::size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) {
      v[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(s) + k * static_cast<std::int64_t>(d);
    }
    out[0] = Tensor::ints({count}, std::move(v));
  }
}

template <typename T>
void cumsum_typed(const Tensor& x, std::size_t axis, bool exclusive, bool reverse, Tensor& y) {
  const std::size_t outer = prod(x.shape, 0, axis);
  const auto dim = static_cast<std::size_t>(x.shape[axis]);
  const std::size_t inner = prod(x.shape, axis + 1, x.shape.size());
  const auto& src = cdata<T>(x);
  auto& dst = data<T>(y);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t q = 0; q < inner; ++q) {
      T acc = 0;
      for (std::size_t step = 0; step < dim; ++step) {
        const std::size_t j = reverse ? dim - 1 - step : step;
        const std::size_t at = (o * dim + j) * inner + q;
        if (exclusive) {
          dst[at] = acc;
          acc += src[at];
        } else {
          acc += src[at];
          dst[at] = acc;
        }
      }
    }
  }
}

void op_CumSum(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  const auto axis = static_cast<std::size_t>(norm_axis(static_cast<std::int64_t>(scalar(need(in, 1, n))), x.shape.size(), n));
  Tensor y = like(x, x.shape);
  const bool exclusive = n.int_attr("exclusive", 0) != 0;
  const bool reverse = n.int_attr("reverse", 0) != 0;
  if (x.dtype == DType::Float) {
    cumsum_typed<float>(x, axis, exclusive, reverse, y);
  } else {
    cumsum_typed<std::int64_t>(x, axis, exclusive, reverse, y);
  }
  out[0] = std::move(y);
}

// ---------------------------------------------------------------- reductions

void reduce(const Node& n, const Ctx& ctx, const Inputs& in, std::vector<Tensor>& out, bool mean, std::int64_t axes_input_opset) {
  const Tensor& x = need(in, 0, n);
  std::vector<std::int64_t> axes;
  if (ctx.opset >= axes_input_opset) {
    if (const Tensor* t = opt(in, 1)) axes = as_ints(*t);
  } else if (const Attr* a = n.attr("axes")) {
    axes = a->ints;
  }
  const bool keep = n.int_attr("keepdims", 1) != 0;
  if (axes.empty() && n.int_attr("noop_with_empty_axes", 0) != 0) {
    out[0] = x;
    return;
  }
  const std::size_t rank = x.shape.size();
  std::vector<bool> reduced(rank, axes.empty());
  for (auto a : axes) reduced[static_cast<std::size_t>(norm_axis(a, rank, n))] = true;
  Shape kept_shape;
  Shape out_shape;
  for (std::size_t d = 0; d < rank; ++d) {
    kept_shape.push_back(reduced[d] ? 1 : x.shape[d]);
    if (!reduced[d]) out_shape.push_back(x.shape[d]);
    else if (keep) out_shape.push_back(1);
  }
  const std::size_t count = x.size() / std::max<std::size_t>(element_count(kept_shape), 1);
  const auto ks = broadcast_strides(kept_shape, x.shape);
  std::vector<double> acc(element_count(kept_shape), 0.0);
  std::vector<std::int64_t> pos(rank, 0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::size_t to = 0;
    for (std::size_t d = 0; d < rank; ++d) to += static_cast<std::size_t>(pos[d]) * ks[d];
    acc[to] += x.dtype == DType::Float ? static_cast<double>(x.f[k]) : static_cast<double>(x.i[k]);
    for (std::size_t d = rank; d-- > 0;) {
      if (++pos[d] < x.shape[d]) break;
      pos[d] = 0;
    }
  }
  if (mean && count > 0) {
    for (auto& v : acc) v /= static_cast<double>(count);
  }
  if (x.dtype == DType::Float) {
    out[0] = Tensor::floats(out_shape, std::vector<float>(acc.begin(), acc.end()));
  } else {
    std::vector<std::int64_t> v;
    for (double a : acc) v.push_back(static_cast<std::int64_t>(a));
    out[0] = Tensor::ints(out_shape, std::move(v));
  }
}

void op_ReduceMean(const Node& n, const Ctx& c, const Inputs& in, std::vector<Tensor>& out) { reduce(n, c, in, out, true, 18); }
void op_ReduceSum(const Node& n, const Ctx& c, const Inputs& in, std::vector<Tensor>& out) { reduce(n, c, in, out, false, 13); }

void op_Softmax(const Node& n, const Ctx& ctx, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  if (x.dtype != DType::Float) fail("Softmax expects floats");
  const std::size_t rank = x.shape.size();
  std::size_t outer = 0;
  std::size_t dim = 0;
  std::size_t inner = 0;
  if (ctx.opset >= 13) {
    const auto axis = static_cast<std::size_t>(norm_axis(n.int_attr("axis", -1), rank, n));
    outer = prod(x.shape, 0, axis);
    dim = static_cast<std::size_t>(x.shape[axis]);
    inner = prod(x.shape, axis + 1, rank);
  } else {
    const auto axis = static_cast<std::size_t>(norm_axis(n.int_attr("axis", 1), rank, n));
    outer = prod(x.shape, 0, axis);
    dim = prod(x.shape, axis, rank);
    inner = 1;
  }
  Tensor y = like(x, x.shape);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t q = 0; q < inner; ++q) {
      const std::size_t base = o * dim * inner + q;
      float top = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j < dim; ++j) top = std::max(top, x.f[base + j * inner]);
      double sum = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        const float e = std::exp(x.f[base + j * inner] - top);
        y.f[base + j * inner] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < dim; ++j) y.f[base + j * inner] = static_cast<float>(y.f[base + j * inner] / sum);
    }
  }
  out[0] = std::move(y);
}

void op_LayerNormalization(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& x = need(in, 0, n);
  const Tensor& scale = need(in, 1, n);
  const Tensor* bias = opt(in, 2);
  const std::size_t rank = x.shape.size();
  const auto axis = static_cast<std::size_t>(norm_axis(n.int_attr("axis", -1), rank, n));
  const double eps = n.float_attr("epsilon", 1e-5f);
  const std::size_t outer = prod(x.shape, 0, axis);
  const std::size_t width = prod(x.shape, axis, rank);
  if (scale.size() != width || (bias != nullptr && bias->size() != width)) {
    fail(fmt::format("LayerNormalization '{}': scale/bias width mismatch", n.name));
  }
  Tensor y = like(x, x.shape);
  Shape stat_shape = x.shape;
  for (std::size_t d = axis; d < rank; ++d) stat_shape[d] = 1;
  std::vector<float> means(outer);
  std::vector<float> inv(outer);
  for (std::size_t o = 0; o < outer; ++o) {
    const float* row = x.f.data() + o * width;
    double mean = 0.0;
    for (std::size_t k = 0; k < width; ++k) mean += row[k];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t k = 0; k < width; ++k) var += (row[k] - mean) * (row[k] - mean);
    var /= static_cast<double>(width);
    const double r = 1.0 / std::sqrt(var + eps);
    for (std::size_t k = 0; k < width; ++k) {
      double v = (row[k] - mean) * r * scale.f[k];
      if (bias != nullptr) v += bias->f[k];
      y.f[o * width + k] = static_cast<float>(v);
    }
    means[o] = static_cast<float>(mean);
    inv[o] = static_cast<float>(r);
  }
  out[0] = std::move(y);
  if (out.size() > 1) out[1] = Tensor::floats(stat_shape, means);
  if (out.size() > 2) out[2] = Tensor::floats(stat_shape, inv);
}

// ---------------------------------------------------------------- matmul

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void op_MatMul(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  Tensor a = need(in, 0, n);
  Tensor b = need(in, 1, n);
  if (a.dtype != DType::Float || b.dtype != DType::Float) fail("MatMul expects floats");
  const bool a_vec = a.shape.size() == 1;
  const bool b_vec = b.shape.size() == 1;
  if (a_vec) a.shape.insert(a.shape.begin(), 1);
  if (b_vec) b.shape.push_back(1);
  const std::int64_t m = a.shape[a.shape.size() - 2];
  const std::int64_t k = a.shape.back();
  const std::int64_t k2 = b.shape[b.shape.size() - 2];
  const std::int64_t nn = b.shape.back();
  if (k != k2) fail(fmt::format("MatMul '{}': inner dims {} and {}", n.name, k, k2));
  const Shape a_batch(a.shape.begin(), a.shape.end() - 2);
  const Shape b_batch(b.shape.begin(), b.shape.end() - 2);
  const Shape batch = broadcast(a_batch, b_batch);
  Shape shape = batch;
  shape.push_back(m);
  shape.push_back(nn);
  Tensor y = Tensor::floats(shape, std::vector<float>(element_count(shape)));
  const auto am = static_cast<std::size_t>(m * k);
  const auto bm = static_cast<std::size_t>(k * nn);
  const auto ym = static_cast<std::size_t>(m * nn);
  for_each_broadcast<2>(batch, {&a_batch, &b_batch}, [&](std::size_t o, const auto& off) {
    Eigen::Map<const RowMat> A(a.f.data() + off[0] * am, m, k);
    Eigen::Map<const RowMat> B(b.f.data() + off[1] * bm, k, nn);
    Eigen::Map<RowMat> Y(y.f.data() + o * ym, m, nn);
    Y.noalias() = A * B;
  });
  if (batch.empty()) {
    Eigen::Map<const RowMat> A(a.f.data(), m, k);
    Eigen::Map<const RowMat> B(b.f.data(), k, nn);
    Eigen::Map<RowMat> Y(y.f.data(), m, nn);
    Y.noalias() = A * B;
  }
  if (a_vec) y.shape.erase(y.shape.end() - 2);
  if (b_vec) y.shape.pop_back();
  out[0] = std::move(y);
}

void op_Gemm(const Node& n, const Ctx&, const Inputs& in, std::vector<Tensor>& out) {
  const Tensor& a = need(in, 0, n);
  const Tensor& b = need(in, 1, n);
  const Tensor* c = opt(in, 2);
  const float alpha = n.float_attr("alpha", 1.0f);
  const float beta = n.float_attr("beta", 1.0f);
  Eigen::Map<const RowMat> A(a.f.data(), a.shape[0], a.shape[1]);
  Eigen::Map<const RowMat> B(b.f.data(), b.shape[0], b.shape[1]);
  RowMat r;
  const bool ta = n.int_attr("transA", 0) != 0;
  const bool tb = n.int_attr("transB", 0) != 0;
  if (ta && tb) r = A.transpose() * B.transpose();
  else if (ta) r = A.transpose() * B;
  else if (tb) r = A * B.transpose();
  else r = A * B;
  r *= alpha;
  Tensor y = Tensor::floats({r.rows(), r.cols()}, std::vector<float>(r.data(), r.data() + r.size()));
  if (c != nullptr && beta != 0.0f) {
    const Shape ys = y.shape;
    Tensor bc = *c;
    for (auto& v : bc.f) v *= beta;
    y = binary<BinKind::Arith>(y, bc, [](float p, float q) { return p + q; }, [](std::int64_t p, std::int64_t q) { return p + q; });
    if (y.shape != ys) fail(fmt::format("Gemm '{}': bias does not broadcast", n.name));
  }
  out[0] = std::move(y);
}

const std::unordered_map<std::string, OpFn>& op_table() {
  static const std::unordered_map<std::string, OpFn> table = {
      {"Abs", op_Abs},
      {"Add", op_Add},
      {"And", op_And},
      {"Cast", op_Cast},
      {"Clip", op_Clip},
      {"Ceil", op_Ceil},
      {"Concat", op_Concat},
      {"Constant", op_Constant},
      {"ConstantOfShape", op_ConstantOfShape},
      {"CumSum", op_CumSum},
      {"Div", op_Div},
      {"Dropout", op_Dropout},
      {"Equal", op_Equal},
      {"Erf", op_Erf},
      {"Exp", op_Exp},
      {"Expand", op_Expand},
      {"Flatten", op_Flatten},
      {"Floor", op_Floor},
      {"Gather", op_Gather},
      {"GatherElements", op_GatherElements},
      {"GatherND", op_GatherND},
      {"Gelu", op_Gelu},
      {"Gemm", op_Gemm},
      {"Greater", op_Greater},
      {"GreaterOrEqual", op_GreaterOrEqual},
      {"Identity", op_Identity},
      {"IsNaN", op_IsNaN},
      {"LayerNormalization", op_LayerNormalization},
      {"Less", op_Less},
      {"LessOrEqual", op_LessOrEqual},
      {"Log", op_Log},
      {"MatMul", op_MatMul},
      {"Max", op_Max},
      {"Min", op_Min},
      {"Mul", op_Mul},
      {"Neg", op_Neg},
      {"Not", op_Not},
      {"Or", op_Or},
      {"Pow", op_Pow},
      {"Range", op_Range},
      {"Reciprocal", op_Reciprocal},
      {"ReduceMean", op_ReduceMean},
      {"ReduceSum", op_ReduceSum},
      {"Relu", op_Relu},
      {"Reshape", op_Reshape},
      {"Shape", op_Shape},
      {"Sigmoid", op_Sigmoid},
      {"Slice", op_Slice},
      {"Softmax", op_Softmax},
      {"Split", op_Split},
      {"Sqrt", op_Sqrt},
      {"Squeeze", op_Squeeze},
      {"Sub", op_Sub},
      {"Tanh", op_Tanh},
      {"Transpose", op_Transpose},
      {"Unsqueeze", op_Unsqueeze},
      {"Where", op_Where},
  };
  return table;
}

// ---------------------------------------------------------------- loading

[[noreturn]] void load_fail(const std::string& msg) { throw Error(Errc::ModelLoadFailure, msg); }

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) load_fail(fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
void copy_raw(const std::string& raw, std::size_t count, std::vector<T>& dst) {
  if (raw.size() != count * sizeof(T)) load_fail("tensor raw_data has the wrong length");
  dst.resize(count);
  std::memcpy(dst.data(), raw.data(), raw.size());
}

Tensor from_proto(const ::onnx::TensorProto& p, const fs::path& dir) {
  Tensor t;
  for (auto d : p.dims()) t.shape.push_back(d);
  const std::size_t count = t.size();

  std::string raw;
  bool has_raw = p.has_raw_data();
  if (p.data_location() == ::onnx::TensorProto::EXTERNAL) {
    std::string location;
    std::size_t offset = 0;
    std::size_t length = 0;
    bool has_length = false;
    for (const auto& kv : p.external_data()) {
      if (kv.key() == "location") location = kv.value();
      if (kv.key() == "offset") offset = std::stoull(kv.value());
      if (kv.key() == "length") {
        length = std::stoull(kv.value());
        has_length = true;
      }
    }
    const std::string all = read_bytes(dir / location);
    if (!has_length) length = all.size() - offset;
    if (offset + length > all.size()) load_fail(fmt::format("external data for '{}' is truncated", p.name()));
    raw = all.substr(offset, length);
    has_raw = true;
  } else if (has_raw) {
    raw = p.raw_data();
  }

  switch (p.data_type()) {
    case kFloat:
      t.dtype = DType::Float;
      if (has_raw) copy_raw(raw, count, t.f);
      else t.f.assign(p.float_data().begin(), p.float_data().end());
      break;
    case kDouble: {
      t.dtype = DType::Float;
      std::vector<double> d;
      if (has_raw) copy_raw(raw, count, d);
      else d.assign(p.double_data().begin(), p.double_data().end());
      t.f.assign(d.begin(), d.end());
      break;
    }
    case kInt64:
      t.dtype = DType::Int64;
      if (has_raw) copy_raw(raw, count, t.i);
      else t.i.assign(p.int64_data().begin(), p.int64_data().end());
      break;
    case kInt32:
    case kInt16:
    case kInt8:
    case kUint8:
    case kBool: {
      t.dtype = p.data_type() == kBool ? DType::Bool : DType::Int64;
      if (has_raw) {
        if (p.data_type() == kInt32) {
          std::vector<std::int32_t> v;
          copy_raw(raw, count, v);
          t.i.assign(v.begin(), v.end());
        } else if (p.data_type() == kInt16) {
          std::vector<std::int16_t> v;
          copy_raw(raw, count, v);
          t.i.assign(v.begin(), v.end());
        } else if (p.data_type() == kInt8) {
          std::vector<std::int8_t> v;
          copy_raw(raw, count, v);
          t.i.assign(v.begin(), v.end());
        } else {
          std::vector<std::uint8_t> v;
          copy_raw(raw, count, v);
          t.i.assign(v.begin(), v.end());
        }
      } else {
        t.i.assign(p.int32_data().begin(), p.int32_data().end());
      }
      break;
    }
    default:
      load_fail(fmt::format("tensor '{}' has unsupported element type {}", p.name(), p.data_type()));
  }
  const std::size_t have = t.dtype == DType::Float ? t.f.size() : t.i.size();
  if (have != count) load_fail(fmt::format("tensor '{}' holds {} values for {} elements", p.name(), have, count));
  return t;
}

}  // namespace

struct Model::Impl {
  std::int64_t opset = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::unordered_map<std::string, int> slots;
  std::vector<std::shared_ptr<const Tensor>> constants;  // by slot, null if not constant
  std::vector<Node> nodes;
  std::vector<int> last_use;  // node index after which a slot can be freed

  int slot_of(const std::string& name) {
    const auto [it, inserted] = slots.emplace(name, static_cast<int>(slots.size()));
    if (inserted) constants.emplace_back();
    return it->second;
  }
};

Model::Model(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Model::~Model() = default;

const std::vector<std::string>& Model::inputs() const { return impl_->inputs; }
const std::vector<std::string>& Model::outputs() const { return impl_->outputs; }
std::int64_t Model::opset() const { return impl_->opset; }

std::unique_ptr<Model> Model::load(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) load_fail(fmt::format("graph file not found: {}", path.string()));
  return parse(read_bytes(path), path.parent_path());
}

std::unique_ptr<Model> Model::parse(std::string_view bytes, const fs::path& dir) {
  ::onnx::ModelProto proto;
  {
    google::protobuf::io::ArrayInputStream raw(bytes.data(), static_cast<int>(bytes.size()));
    google::protobuf::io::CodedInputStream coded(&raw);
    coded.SetTotalBytesLimit(std::numeric_limits<int>::max());
    if (!proto.ParseFromCodedStream(&coded)) load_fail("graph file is not a valid ONNX model");
  }
  auto impl = std::make_unique<Impl>();
  for (const auto& op : proto.opset_import()) {
    if (op.domain().empty() || op.domain() == "ai.onnx") impl->opset = op.version();
  }
  if (impl->opset == 0) load_fail("graph does not import the default operator set");

  const auto& g = proto.graph();
  for (const auto& init : g.initializer()) {
    const int s = impl->slot_of(init.name());
    impl->constants[static_cast<std::size_t>(s)] = std::make_shared<const Tensor>(from_proto(init, dir));
  }
  for (const auto& in : g.input()) {
    const int s = impl->slot_of(in.name());
    if (!impl->constants[static_cast<std::size_t>(s)]) impl->inputs.push_back(in.name());
  }
  for (const auto& o : g.output()) impl->outputs.push_back(o.name());

  std::vector<std::string> unsupported;
  for (const auto& np : g.node()) {
    Node node;
    node.op = np.op_type();
    node.name = np.name();
    if (!np.domain().empty() && np.domain() != "ai.onnx") {
      unsupported.push_back(np.domain() + "." + node.op);
      continue;
    }
    const auto it = op_table().find(node.op);
    if (it == op_table().end()) {
      unsupported.push_back(node.op);
      continue;
    }
    node.fn = it->second;
    for (const auto& name : np.input()) node.in.push_back(name.empty() ? -1 : impl->slot_of(name));
    for (const auto& name : np.output()) node.out.push_back(name.empty() ? -1 : impl->slot_of(name));
    for (const auto& a : np.attribute()) {
      Attr attr;
      attr.i = a.i();
      attr.f = a.f();
      attr.s = a.s();
      attr.ints.assign(a.ints().begin(), a.ints().end());
      attr.floats.assign(a.floats().begin(), a.floats().end());
      if (a.has_t()) attr.t = std::make_shared<Tensor>(from_proto(a.t(), dir));
      if (a.type() == ::onnx::AttributeProto::GRAPH || a.type() == ::onnx::AttributeProto::GRAPHS) {
        unsupported.push_back(node.op + " with subgraph");
      }
      node.attrs.emplace(a.name(), std::move(attr));
    }
    impl->nodes.push_back(std::move(node));
  }
  if (!unsupported.empty()) {
    std::sort(unsupported.begin(), unsupported.end());
    unsupported.erase(std::unique(unsupported.begin(), unsupported.end()), unsupported.end());
    std::string list;
    for (const auto& u : unsupported) list += (list.empty() ? "" : ", ") + u;
    load_fail(fmt::format("graph uses unsupported operators: {}", list));
  }

  impl->last_use.assign(impl->slots.size(), -1);
  for (std::size_t k = 0; k < impl->nodes.size(); ++k) {
    for (int s : impl->nodes[k].in) {
      if (s >= 0) impl->last_use[static_cast<std::size_t>(s)] = static_cast<int>(k);
    }
  }
  for (const auto& o : impl->outputs) {
    const auto it = impl->slots.find(o);
    if (it == impl->slots.end()) load_fail(fmt::format("graph output '{}' is never produced", o));
    impl->last_use[static_cast<std::size_t>(it->second)] = std::numeric_limits<int>::max();
  }
  return std::unique_ptr<Model>(new Model(std::move(impl)));
}

std::vector<Tensor> Model::run(const std::vector<std::pair<std::string, Tensor>>& feeds,
                               const std::vector<std::string>& wanted) const {
  const Impl& m = *impl_;
  std::vector<std::shared_ptr<const Tensor>> env = m.constants;
  for (const auto& [name, tensor] : feeds) {
    const auto it = m.slots.find(name);
    if (it == m.slots.end()) fail(fmt::format("graph has no input '{}'", name));
    env[static_cast<std::size_t>(it->second)] = std::make_shared<const Tensor>(tensor);
  }
  std::vector<int> keep;
  for (const auto& w : wanted) {
    const auto it = m.slots.find(w);
    if (it == m.slots.end()) fail(fmt::format("graph has no value '{}'", w));
    keep.push_back(it->second);
  }

  const Ctx ctx{m.opset};
  Inputs in;
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < m.nodes.size(); ++k) {
    const Node& node = m.nodes[k];
    in.clear();
    for (int s : node.in) {
      if (s < 0) {
        in.push_back(nullptr);
        continue;
      }
      const auto& t = env[static_cast<std::size_t>(s)];
      if (!t) fail(fmt::format("{} '{}': input is not available", node.op, node.name));
      in.push_back(t.get());
    }
    out.assign(node.out.size(), Tensor{});
    try {
      node.fn(node, ctx, in, out);
    } catch (const Error& e) {
      if (e.code() != Errc::InferenceFailure) throw;
      std::string_view what = e.what();
      what.remove_prefix(std::min(what.size(), errc_name(e.code()).size() + 2));
      fail(fmt::format("{} '{}': {}", node.op, node.name, what));
    } catch (const std::exception& e) {
      fail(fmt::format("{} '{}': {}", node.op, node.name, e.what()));
    }
    for (std::size_t o = 0; o < node.out.size(); ++o) {
      if (node.out[o] >= 0) env[static_cast<std::size_t>(node.out[o])] = std::make_shared<const Tensor>(std::move(out[o]));
    }
    for (int s : node.in) {
      if (s < 0 || m.constants[static_cast<std::size_t>(s)]) continue;
      if (m.last_use[static_cast<std::size_t>(s)] == static_cast<int>(k) &&
          std::find(keep.begin(), keep.end(), s) == keep.end()) {
        env[static_cast<std::size_t>(s)].reset();
      }
    }
  }
  std::vector<Tensor> result;
  for (int s : keep) {
    const auto& t = env[static_cast<std::size_t>(s)];
    if (!t) fail("requested value was not computed");
    result.push_back(*t);
  }
  return result;
}

std::vector<std::string> supported_ops() {
  std::vector<std::string> out;
  for (const auto& [name, _] : op_table()) out.push_back(name);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace influence::onnx
