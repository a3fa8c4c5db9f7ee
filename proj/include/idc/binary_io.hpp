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

#ifndef IDC_BINARY_IO_HPP_
#define IDC_BINARY_IO_HPP_

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

#include <torch/torch.h>

namespace idc {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian tagged primitives over std::ostream / std::istream.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void Put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void PutBytes(std::string_view bytes) {
    Put<std::uint64_t>(bytes.size());
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  void PutRaw(std::string_view bytes) {
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  void PutTensor(const torch::Tensor& tensor);

  bool ok() const { return static_cast<bool>(out_); }

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string context)
      : in_(in), context_(std::move(context)) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T Get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) Truncated();
    return value;
  }
  std::string GetBytes(std::uint64_t max_size = std::uint64_t{1} << 32);
  std::string GetRaw(std::size_t n);
  torch::Tensor GetTensor();

  [[noreturn]] void Truncated() const {
    throw FormatError(context_ + ": truncated or corrupt data");
  }

 private:
  std::istream& in_;
  std::string context_;
};

}  // namespace idc

#endif  // IDC_BINARY_IO_HPP_
