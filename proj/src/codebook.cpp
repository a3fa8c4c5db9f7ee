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

#include "idc/codebook.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "idc/binary_io.hpp"
#include "idc/util.hpp"

namespace idc {
namespace {

constexpr char kCodebookMagic[8] = {'I', 'D', 'C', 'L', 'B', 'L', 'S', '\0'};
constexpr std::uint32_t kCodebookVersion = 1;
constexpr int kMaxAttempts = 3;

// Orthonormal rows spanning the row space of a K x n Gaussian draw, or an
// undefined tensor when the draw is rank deficient.
torch::Tensor OrthonormalRows(std::int64_t k, std::int64_t n,
                              std::uint64_t seed) {
  auto gen = MakeGenerator(seed);
  auto v = torch::randn({k, n}, gen, torch::TensorOptions().dtype(torch::kFloat64));
  // V^T = Q R with Q n x K; the columns of Q become the label basis.
  auto [q, r] = torch::linalg_qr(v.t(), "reduced");
  auto diag = r.diagonal().abs();
  const double scale = r.abs().max().item<double>();
  if (diag.min().item<double>() <= 1e-10 * std::max(scale, 1.0)) {
    return {};
  }
  return q.t().contiguous();
}

torch::Tensor AsBatch(const torch::Tensor& sample, const LabelCodebook& cb,
                      const char* what) {
  const auto dims = cb.label_shape.dims();
  if (sample.dim() == 3 && sample.sizes() == at::IntArrayRef(dims)) {
    return sample.unsqueeze(0);
  }
  if (sample.dim() == 4 && sample.sizes().slice(1) == at::IntArrayRef(dims)) {
    return sample;
  }
  throw std::invalid_argument(std::string(what) + ": sample shape " +
                              ShapeString(sample) + " does not match label shape " +
                              ToString(cb.label_shape));
}

}  // namespace

LabelShape ParseLabelShape(const std::string& text) {
  LabelShape s;
  char x1 = 0, x2 = 0;
  std::istringstream is(text);
  if (!(is >> s.channels >> x1 >> s.height >> x2 >> s.width) || x1 != 'x' ||
      x2 != 'x' || s.channels < 1 || s.height < 1 || s.width < 1) {
    throw std::invalid_argument("label shape must look like CxHxW, got '" + text + "'");
  }
  return s;
}

std::string ToString(const LabelShape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) +
         "x" + std::to_string(shape.width);
}

LabelCodebook generate_codebook(std::int64_t num_classes,
                                const LabelShape& label_shape,
                                const DataRange& data_range,
                                std::uint64_t seed) {
  const std::int64_t n = label_shape.numel();
  if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
  if (num_classes > n) {
    throw DimensionError("cannot build " + std::to_string(num_classes) +
                         " orthogonal labels in dimension " + std::to_string(n));
  }
  if (!(data_range.lo < data_range.hi)) {
    throw std::invalid_argument("data range requires lo < hi");
  }

  LabelCodebook cb;
  cb.num_classes = num_classes;
  cb.label_shape = label_shape;
  cb.data_range = data_range;
  cb.seed = seed;
  for (int attempt = 0; attempt < kMaxAttempts && !cb.basis.defined(); ++attempt) {
    cb.effective_seed = seed + static_cast<std::uint64_t>(attempt) * 0x9E3779B97F4A7C15ULL;
    cb.basis = OrthonormalRows(num_classes, n, cb.effective_seed);
  }
  if (!cb.basis.defined()) {
    throw std::runtime_error("random matrix stayed rank deficient after " +
                             std::to_string(kMaxAttempts) + " attempts");
  }

  // One global min-max map keeps the pairwise label distances equal.
  cb.basis_min = cb.basis.min().item<double>();
  cb.basis_max = cb.basis.max().item<double>();
  torch::Tensor mapped;
  if (cb.basis_max > cb.basis_min) {
    const double scale = data_range.width() / (cb.basis_max - cb.basis_min);
    mapped = (cb.basis - cb.basis_min) * scale + data_range.lo;
    mapped = mapped.clamp(data_range.lo, data_range.hi);
  } else {
    mapped = torch::full_like(cb.basis, 0.5 * (data_range.lo + data_range.hi));
  }
  std::vector<std::int64_t> dims{num_classes};
  for (auto d : label_shape.dims()) dims.push_back(d);
  cb.labels = mapped.to(torch::kFloat32).reshape(dims).contiguous();
  return cb;
}

torch::Tensor label_distances(const torch::Tensor& sample,
                              const LabelCodebook& codebook) {
  auto batch = AsBatch(sample, codebook, "label_distances");
  auto labels = codebook.labels.to(batch.scalar_type());
  auto d = (batch.unsqueeze(1) - labels.unsqueeze(0)).abs().sum({2, 3, 4});
  return sample.dim() == 3 ? d.squeeze(0) : d;
}

std::int64_t ArgminLowest(const std::vector<double>& distances) {
  if (distances.empty()) throw std::invalid_argument("empty distance list");
  std::int64_t best = 0;
  for (std::size_t i = 1; i < distances.size(); ++i) {
    if (distances[i] < distances[best]) best = static_cast<std::int64_t>(i);
  }
  return best;
}

std::vector<std::int64_t> nearest_labels(const torch::Tensor& batch,
                                         const LabelCodebook& codebook) {
  torch::NoGradGuard no_grad;
  auto b = AsBatch(batch, codebook, "nearest_label");
  auto d = label_distances(b.detach().to(torch::kFloat64), codebook).contiguous();
  std::vector<std::int64_t> out;
  out.reserve(d.size(0));
  auto acc = d.accessor<double, 2>();
  for (std::int64_t i = 0; i < d.size(0); ++i) {
    std::vector<double> row(acc[i].data(), acc[i].data() + d.size(1));
    out.push_back(ArgminLowest(row));
  }
  return out;
}

std::int64_t nearest_label(const torch::Tensor& sample,
                           const LabelCodebook& codebook) {
  if (sample.dim() != 3) {
    throw std::invalid_argument("nearest_label expects a single [c,h,w] sample");
  }
  return nearest_labels(sample, codebook).front();
}

void SaveCodebook(const LabelCodebook& cb, std::ostream& out) {
  BinaryWriter w(out);
  w.PutRaw(std::string_view(kCodebookMagic, sizeof(kCodebookMagic)));
  w.Put<std::uint32_t>(kCodebookVersion);
  w.Put<std::int64_t>(cb.num_classes);
  w.Put<std::int64_t>(cb.label_shape.channels);
  w.Put<std::int64_t>(cb.label_shape.height);
  w.Put<std::int64_t>(cb.label_shape.width);
  w.Put<double>(cb.data_range.lo);
  w.Put<double>(cb.data_range.hi);
  w.Put<std::uint64_t>(cb.seed);
  w.Put<std::uint64_t>(cb.effective_seed);
  w.Put<double>(cb.basis_min);
  w.Put<double>(cb.basis_max);
  w.PutTensor(cb.basis);
  w.PutTensor(cb.labels);
  if (!w.ok()) throw std::runtime_error("failed writing codebook");
}

LabelCodebook LoadCodebook(std::istream& in) {
  BinaryReader r(in, "codebook");
  if (r.GetRaw(sizeof(kCodebookMagic)) !=
      std::string(kCodebookMagic, sizeof(kCodebookMagic))) {
    throw FormatError("codebook: bad magic header");
  }
  const auto version = r.Get<std::uint32_t>();
  if (version != kCodebookVersion) {
    throw FormatError("codebook: format version " + std::to_string(version) +
                      " is not supported (expected " +
                      std::to_string(kCodebookVersion) + ")");
  }
  LabelCodebook cb;
  cb.num_classes = r.Get<std::int64_t>();
  cb.label_shape.channels = r.Get<std::int64_t>();
  cb.label_shape.height = r.Get<std::int64_t>();
  cb.label_shape.width = r.Get<std::int64_t>();
  cb.data_range.lo = r.Get<double>();
  cb.data_range.hi = r.Get<double>();
  cb.seed = r.Get<std::uint64_t>();
  cb.effective_seed = r.Get<std::uint64_t>();
  cb.basis_min = r.Get<double>();
  cb.basis_max = r.Get<double>();
  cb.basis = r.GetTensor();
  cb.labels = r.GetTensor();
  if (cb.basis.dim() != 2 || cb.basis.size(0) != cb.num_classes ||
      cb.labels.dim() != 4 || cb.labels.size(0) != cb.num_classes) {
    throw FormatError("codebook: tensor shapes disagree with header");
  }
  return cb;
}

void SaveCodebookFile(const LabelCodebook& codebook, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  SaveCodebook(codebook, out);
}

LabelCodebook LoadCodebookFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return LoadCodebook(in);
}

}  // namespace idc
