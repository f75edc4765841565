// Copyright 2025-2026 The mlc-asr-kit Authors
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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asrkit {

enum class Dtype : std::uint8_t {
  kF32,
  kF16,
};

std::string_view to_string(Dtype dtype);
std::optional<Dtype> parse_dtype(std::string_view name);  // "F32" / "F16"
std::size_t dtype_size(Dtype dtype);

// IEEE 754 binary16 conversions in software. half_to_float is exact;
// half_from_double rounds to nearest, ties to even, in a single step from
// the double value (no intermediate float rounding).
float half_to_float(std::uint16_t bits);
std::uint16_t half_from_double(double value);

struct Tensor {
  Dtype dtype = Dtype::kF32;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> data;  // raw little-endian element buffer

  std::size_t num_elements() const;

  // Element decode/encode through double, independent of host byte order.
  double element(std::size_t index) const;
  void set_element(std::size_t index, double value);

  std::vector<double> to_doubles() const;
  static Tensor from_doubles(Dtype dtype, std::vector<std::int64_t> shape,
                             std::span<const double> values);

  bool operator==(const Tensor&) const = default;
};

// Named map of shaped tensors. Insertion validates that the buffer length
// matches product(shape) x element size and that no dimension is negative.
class TensorStore {
 public:
  bool contains(const std::string& name) const { return tensors_.contains(name); }
  const Tensor& at(const std::string& name) const;
  void put(const std::string& name, Tensor tensor);

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }

  bool operator==(const TensorStore&) const = default;

 private:
  std::map<std::string, Tensor> tensors_;
};

// Container layout: an 8-byte little-endian unsigned header length N, then
// N bytes of UTF-8 JSON mapping each tensor name to {"dtype": "F32"|"F16",
// "shape": [...], "data_offsets": [begin, end]} with offsets relative to the
// first byte after the header, then the raw payloads. Offsets must tile the
// data region exactly with no overlap. A "__metadata__" entry is tolerated
// on read and skipped. Violations raise FormatError citing the byte offset.
struct TensorInfo {
  Dtype dtype = Dtype::kF32;
  std::vector<std::int64_t> shape;
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
};

// Validating reader that keeps the file open so individual tensors can be
// fetched without loading the whole store, which is what lets averaging
// stream one tensor name at a time across many checkpoint files.
class StoreReader {
 public:
  explicit StoreReader(std::filesystem::path file);

  const std::filesystem::path& path() const { return path_; }
  const std::map<std::string, TensorInfo>& infos() const { return infos_; }

  Tensor read(const std::string& name);

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t data_begin_ = 0;
  std::map<std::string, TensorInfo> infos_;
};

TensorStore read_store(const std::filesystem::path& file);

// Writes tensors sorted by name with contiguous offsets; byte-for-byte
// deterministic for a given store.
void write_store(const TensorStore& store, const std::filesystem::path& file);

// Element-wise arithmetic mean with equal weights. All stores must share an
// identical name/dtype/shape schema; a mismatch raises InputError naming the
// first offending tensor in name order. Sums are accumulated in double and
// rounded once to the storage dtype.
TensorStore average(std::span<const TensorStore> stores);

// Disk-to-disk averaging that holds one tensor in memory at a time.
void average_files(std::span<const std::filesystem::path> inputs,
                   const std::filesystem::path& out);

}  // namespace asrkit
