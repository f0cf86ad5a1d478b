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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// A small interpreter for ONNX inference graphs: enough of the default
// operator set to run exported BERT-family sentence encoders on the CPU.
namespace influence::onnx {

// Doubles are held as floats and every integer type as int64. Booleans are
// int64 0/1.
enum class DType { Float, Int64, Bool };

using Shape = std::vector<std::int64_t>;

std::size_t element_count(const Shape& shape);

struct Tensor {
  DType dtype = DType::Float;
  Shape shape;
  std::vector<float> f;         // Float
  std::vector<std::int64_t> i;  // Int64 and Bool

  std::size_t size() const { return element_count(shape); }

  static Tensor floats(Shape shape, std::vector<float> values);
  static Tensor ints(Shape shape, std::vector<std::int64_t> values);
  static Tensor bools(Shape shape, std::vector<std::int64_t> values);
};

class Model {
 public:
  // Throws ModelLoadFailure for unreadable files and unsupported operators.
  static std::unique_ptr<Model> load(const std::filesystem::path& path);
  static std::unique_ptr<Model> parse(std::string_view bytes, const std::filesystem::path& external_data_dir = {});
  ~Model();

  // Graph inputs that are not initializers.
  const std::vector<std::string>& inputs() const;
  const std::vector<std::string>& outputs() const;
  std::int64_t opset() const;

  // Thread-safe. Throws InferenceFailure.
  std::vector<Tensor> run(const std::vector<std::pair<std::string, Tensor>>& feeds,
                          const std::vector<std::string>& wanted) const;

  struct Impl;

 private:
  explicit Model(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

// Operator types the interpreter implements, sorted.
std::vector<std::string> supported_ops();

}  // namespace influence::onnx
