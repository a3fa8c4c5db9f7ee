/* Copyright 2026 The IDC Authors. All Rights Reserved.

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

#ifndef IDC_UTIL_HPP_
#define IDC_UTIL_HPP_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <torch/torch.h>

namespace idc {

inline constexpr std::string_view kVersionTag = "idc-0.3.0";

// FNV-1a, stable across platforms and runs.
inline std::uint64_t Fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline torch::Generator MakeGenerator(std::uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

inline std::string ShapeString(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

inline void CheckSameShape(const torch::Tensor& a, const torch::Tensor& b,
                           std::string_view what) {
  if (a.sizes() != b.sizes()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                ShapeString(a) + " vs " + ShapeString(b));
  }
}

}  // namespace idc

#endif  // IDC_UTIL_HPP_
