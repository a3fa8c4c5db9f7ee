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

#include "idc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "idc/util.hpp"

namespace idc {
namespace {

namespace fs = std::filesystem;

constexpr std::int64_t kMaxShapes = 10;

// Portable uniform/normal draws on top of mt19937_64.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Normal() {
    const double u1 = std::max(Uniform(), 1e-300);
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  std::uint64_t Below(std::uint64_t n) { return engine_() % n; }

 private:
  std::mt19937_64 engine_;
};

bool InsideShape(std::int64_t shape, double dx, double dy, double r) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  const double thick = r / 3.0;
  switch (shape) {
    case 0: return ax <= r && ay <= r;                                   // square
    case 1: return dx * dx + dy * dy <= r * r;                           // disc
    case 2: return ay <= thick && ax <= 1.3 * r;                         // horizontal bar
    case 3: return ax <= thick && ay <= 1.3 * r;                         // vertical bar
    case 4: return (ax <= thick && ay <= r) || (ay <= thick && ax <= r); // plus
    case 5: {                                                            // ring
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.3 * r * r;
    }
    case 6: return dy >= -r && dy <= r && ax <= 0.5 * (dy + r);          // triangle
    case 7:                                                              // diagonal cross
      return ax <= r && ay <= r &&
             (std::abs(dx - dy) <= 0.5 * r || std::abs(dx + dy) <= 0.5 * r);
    case 8: return ax + ay <= r;                                         // diamond
    case 9: {                                                            // frame
      const double m = std::max(ax, ay);
      return m <= r && m >= 0.55 * r;
    }
  }
  return false;
}

Dataset MakeShapes(const DatasetSpec& spec, std::int64_t k) {
  if (k < 2 || k > kMaxShapes) {
    throw std::invalid_argument("shapes-K supports 2 <= K <= 10, got " + std::to_string(k));
  }
  const std::int64_t res = spec.resolution;
  if (res < 8) throw std::invalid_argument("shapes-K needs resolution >= 8");
  std::int64_t n = spec.num_samples;
  if (n == 0) n = spec.split == "test" ? 256 : 512;
  if (n < 0) throw std::invalid_argument("num_samples must be >= 0");

  PortableRng rng(Fnv1a(spec.name + "/" + spec.split + "/" + std::to_string(spec.seed)));
  std::vector<std::int64_t> labels(n);
  for (std::int64_t i = 0; i < n; ++i) labels[i] = i % k;
  for (std::int64_t i = n - 1; i > 0; --i) {
    std::swap(labels[i], labels[rng.Below(static_cast<std::uint64_t>(i + 1))]);
  }

  auto images = torch::empty({n, 3, res, res}, torch::TensorOptions().dtype(torch::kFloat32));
  auto acc = images.accessor<float, 4>();
  for (std::int64_t i = 0; i < n; ++i) {
    const double r = rng.Uniform(0.22, 0.34) * res;
    const double cx = res / 2.0 + rng.Uniform(-0.12, 0.12) * res;
    const double cy = res / 2.0 + rng.Uniform(-0.12, 0.12) * res;
    double fg[3], bg[3];
    for (int c = 0; c < 3; ++c) {
      fg[c] = rng.Uniform(0.55, 1.0);
      bg[c] = rng.Uniform(0.0, 0.3);
    }
    for (std::int64_t y = 0; y < res; ++y) {
      for (std::int64_t x = 0; x < res; ++x) {
        const bool in = InsideShape(labels[i], x + 0.5 - cx, y + 0.5 - cy, r);
        for (int c = 0; c < 3; ++c) {
          const double v = std::clamp((in ? fg[c] : bg[c]) + 0.04 * rng.Normal(), 0.0, 1.0);
          acc[i][c][y][x] = static_cast<float>(2.0 * v - 1.0);
        }
      }
    }
  }
  Dataset ds;
  ds.name = spec.name;
  ds.images = images;
  ds.labels = std::move(labels);
  ds.num_classes = k;
  ds.class_ids.resize(k);
  std::iota(ds.class_ids.begin(), ds.class_ids.end(), 0);
  return ds;
}

std::vector<unsigned char> ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset LoadCifar(const DatasetSpec& spec, bool hundred) {
  if (spec.path.empty()) {
    throw std::invalid_argument(spec.name + " needs a data directory (path)");
  }
  if (spec.resolution != 32) {
    throw std::invalid_argument(spec.name + " images are 32x32; resolution " +
                                std::to_string(spec.resolution) + " requested");
  }
  const fs::path root(spec.path);
  if (!fs::is_directory(root)) {
    throw std::runtime_error("dataset directory " + root.string() + " does not exist");
  }
  std::vector<fs::path> files;
  if (hundred) {
    files.push_back(root / (spec.split == "test" ? "test.bin" : "train.bin"));
  } else if (spec.split == "test") {
    files.push_back(root / "test_batch.bin");
  } else {
    for (int b = 1; b <= 5; ++b) files.push_back(root / ("data_batch_" + std::to_string(b) + ".bin"));
  }
  const std::size_t pixels = 3 * 32 * 32;
  const std::size_t header = hundred ? 2 : 1;
  const std::size_t record = header + pixels;
  const std::int64_t classes = hundred ? 100 : 10;

  std::vector<std::vector<unsigned char>> blobs;
  std::size_t total = 0;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw std::runtime_error("missing dataset file " + f.string());
    auto blob = ReadFile(f);
    if (blob.empty() || blob.size() % record != 0) {
      throw std::runtime_error("corrupt dataset file " + f.string() + ": size " +
                               std::to_string(blob.size()) + " is not a multiple of " +
                               std::to_string(record));
    }
    total += blob.size() / record;
    blobs.push_back(std::move(blob));
  }

  auto images = torch::empty({static_cast<std::int64_t>(total), 3, 32, 32},
                             torch::TensorOptions().dtype(torch::kFloat32));
  float* out = images.data_ptr<float>();
  std::vector<std::int64_t> labels;
  labels.reserve(total);
  for (const auto& blob : blobs) {
    for (std::size_t off = 0; off < blob.size(); off += record) {
      const std::int64_t label = blob[off + header - 1];
      if (label >= classes) {
        throw std::runtime_error("corrupt record in " + spec.name + ": label " +
                                 std::to_string(label));
      }
      labels.push_back(label);
      for (std::size_t p = 0; p < pixels; ++p) {
        *out++ = static_cast<float>(blob[off + header + p] / 255.0 * 2.0 - 1.0);
      }
    }
  }
  Dataset ds;
  ds.name = spec.name;
  ds.images = images;
  ds.labels = std::move(labels);
  ds.num_classes = classes;
  ds.class_ids.resize(classes);
  std::iota(ds.class_ids.begin(), ds.class_ids.end(), 0);
  return ds;
}

Dataset FilterClasses(Dataset ds, const std::vector<std::int64_t>& keep) {
  std::vector<std::int64_t> remap(ds.num_classes, -1);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= ds.num_classes) {
      throw std::invalid_argument("class subset entry " + std::to_string(keep[i]) +
                                  " is outside 0.." + std::to_string(ds.num_classes - 1));
    }
    if (remap[keep[i]] >= 0) throw std::invalid_argument("duplicate class in subset");
    remap[keep[i]] = static_cast<std::int64_t>(i);
  }
  std::vector<std::int64_t> rows, labels;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (remap[ds.labels[i]] >= 0) {
      rows.push_back(static_cast<std::int64_t>(i));
      labels.push_back(remap[ds.labels[i]]);
    }
  }
  ds.images = ds.images.index_select(0, torch::tensor(rows, torch::kInt64)).contiguous();
  ds.labels = std::move(labels);
  ds.num_classes = static_cast<std::int64_t>(keep.size());
  ds.class_ids = keep;
  return ds;
}

}  // namespace

LabeledImages Dataset::Head(std::int64_t limit) const {
  const auto n = (limit <= 0) ? size() : std::min(limit, size());
  return {images.slice(0, 0, n), std::vector<std::int64_t>(labels.begin(), labels.begin() + n)};
}

std::vector<std::int64_t> ParseIntList(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    try {
      out.push_back(std::stoll(item, &used));
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw std::invalid_argument("cannot parse integer list '" + text + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument("empty integer list");
  return out;
}

Dataset load_dataset(const DatasetSpec& spec) {
  if (spec.split != "train" && spec.split != "test") {
    throw std::invalid_argument("split must be 'train' or 'test', got '" + spec.split + "'");
  }
  Dataset ds;
  if (spec.name.rfind("shapes-", 0) == 0) {
    std::int64_t k = 0;
    try {
      std::size_t used = 0;
      const auto digits = spec.name.substr(7);
      k = std::stoll(digits, &used);
      if (used != digits.size()) k = 0;
    } catch (const std::logic_error&) {
      k = 0;
    }
    if (k == 0) throw std::invalid_argument("bad synthetic dataset name '" + spec.name + "'");
    ds = MakeShapes(spec, k);
  } else if (spec.name == "cifar10") {
    ds = LoadCifar(spec, false);
  } else if (spec.name == "cifar100") {
    ds = LoadCifar(spec, true);
  } else {
    throw std::invalid_argument("unknown dataset '" + spec.name + "'");
  }
  if (!spec.classes.empty()) ds = FilterClasses(std::move(ds), spec.classes);
  if (ds.size() == 0) throw std::runtime_error("dataset '" + spec.name + "' is empty");
  return ds;
}

}  // namespace idc
