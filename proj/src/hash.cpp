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

#include "influence/hash.hpp"

#include <openssl/evp.h>

#include <fmt/format.h>

#include <memory>
#include <stdexcept>

namespace influence {

Sha256Digest sha256(std::string_view data) {
  Sha256Digest digest{};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1 || len != digest.size()) {
    throw std::runtime_error("sha256 failed");
  }
  return digest;
}

std::string sha256_hex(std::string_view data) {
  const Sha256Digest d = sha256(data);
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : d) out += fmt::format("{:02x}", b);
  return out;
}

std::uint64_t sha256_u64(std::string_view data) {
  const Sha256Digest d = sha256(data);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | d[static_cast<std::size_t>(i)];
  return v;
}

std::string hex_u64(std::uint64_t value) { return fmt::format("{:016x}", value); }

}  // namespace influence
