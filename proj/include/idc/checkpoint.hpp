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

// Checkpoint container:
//
//   "IDCCKPT\0"  u32 version
//   header      length-prefixed JSON: train config, predictor config hash,
//               step, version tag, has_ema
//   codebook    codebook record
//   schedule    schedule record
//   weights     u64 count, then (name, tensor) pairs
//   ema         same layout, present when has_ema
//   optimizer   length-prefixed serialized Adam state
//   rng         generator state tensor
//   "IDCEND\0\0"

#ifndef IDC_CHECKPOINT_HPP_
#define IDC_CHECKPOINT_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>

#include "idc/binary_io.hpp"
#include "idc/predictor.hpp"
#include "idc/train.hpp"

namespace idc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const TrainState& state, std::ostream& out);
void save_checkpoint(const TrainState& state, const std::string& path);

// Throws FormatError on bad magic, unsupported version or truncation and
// CheckpointMismatch when the stored predictor config does not match its
// hash, the stored weights, or `expected` when given.
TrainState load_checkpoint(std::istream& in,
                           const PredictorConfig* expected = nullptr);
TrainState load_checkpoint(const std::string& path,
                           const PredictorConfig* expected = nullptr);

}  // namespace idc

#endif  // IDC_CHECKPOINT_HPP_
