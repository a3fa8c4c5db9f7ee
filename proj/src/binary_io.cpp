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

#include "idc/binary_io.hpp"

#include <vector>

namespace idc {
namespace {

// On-disk dtype codes; never renumber.
enum class DType : std::uint8_t {
  kFloat32 = 1,
  kFloat64 = 2,
  kInt64 = 3,
  kUInt8 = 4,
  kBool = 5,
};

DType ToCode(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return DType::kFloat32;
    case torch::kFloat64: return DType::kFloat64;
    case torch::kInt64: return DType::kInt64;
    case torch::kUInt8: return DType::kUInt8;
    case torch::kBool: return DType::kBool;
    default:
      throw std::invalid_argument("unsupported tensor dtype for serialization");
  }
}

torch::ScalarType FromCode(std::uint8_t code, const BinaryReader& reader) {
  switch (static_cast<DType>(code)) {
    case DType::kFloat32: return torch::kFloat32;
    case DType::kFloat64: return torch::kFloat64;
    case DType::kInt64: return torch::kInt64;
    case DType::kUInt8: return torch::kUInt8;
    case DType::kBool: return torch::kBool;
  }
  reader.Truncated();
}

}  // namespace

void BinaryWriter::PutTensor(const torch::Tensor& tensor) {
  auto t = tensor.detach().to(torch::kCPU).contiguous();
  Put<std::uint8_t>(static_cast<std::uint8_t>(ToCode(t.scalar_type())));
  Put<std::uint32_t>(static_cast<std::uint32_t>(t.dim()));
  for (auto d : t.sizes()) Put<std::int64_t>(d);
  const auto bytes = static_cast<std::size_t>(t.numel()) * t.element_size();
  Put<std::uint64_t>(bytes);
  out_.write(static_cast<const char*>(t.data_ptr()),
             static_cast<std::streamsize>(bytes));
}

std::string BinaryReader::GetBytes(std::uint64_t max_size) {
  const auto n = Get<std::uint64_t>();
  if (n > max_size) Truncated();
  return GetRaw(static_cast<std::size_t>(n));
}

std::string BinaryReader::GetRaw(std::size_t n) {
  std::string s(n, '\0');
  in_.read(s.data(), static_cast<std::streamsize>(n));
  if (!in_) Truncated();
  return s;
}

torch::Tensor BinaryReader::GetTensor() {
  const auto dtype = FromCode(Get<std::uint8_t>(), *this);
  const auto ndim = Get<std::uint32_t>();
  if (ndim > 16) Truncated();
  std::vector<std::int64_t> dims(ndim);
  std::int64_t numel = 1;
  for (auto& d : dims) {
    d = Get<std::int64_t>();
    if (d < 0 || d > (std::int64_t{1} << 40)) Truncated();
    numel *= d;
  }
  const auto bytes = Get<std::uint64_t>();
  auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
  if (bytes != static_cast<std::uint64_t>(numel) * t.element_size()) Truncated();
  in_.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
  if (!in_) Truncated();
  return t;
}

}  // namespace idc
