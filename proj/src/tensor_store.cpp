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

#include "asrkit/tensor_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

#include "asrkit/errors.hpp"
#include "json.hpp"

namespace asrkit {

namespace {

constexpr char kMetadataKey[] = "__metadata__";

std::optional<std::uint64_t> element_count(std::span<const std::int64_t> shape) {
  std::uint64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) return std::nullopt;
    const auto u = static_cast<std::uint64_t>(d);
    if (u != 0 && n > std::numeric_limits<std::uint64_t>::max() / u) return std::nullopt;
    n *= u;
  }
  return n;
}

std::uint32_t load_le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_le32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
  p[2] = static_cast<std::uint8_t>(v >> 16);
  p[3] = static_cast<std::uint8_t>(v >> 24);
}

std::uint16_t load_le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void store_le16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

// Exact for 0 <= x < 2^52: floor and the fractional difference are both
// representable, so no spurious rounding enters the comparison.
double round_ties_to_even(double x) {
  const double fl = std::floor(x);
  const double frac = x - fl;
  if (frac > 0.5) return fl + 1.0;
  if (frac < 0.5) return fl;
  return std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
}

template <typename MapA, typename MapB>
void check_schema_match(const MapA& ref, const MapB& other, const std::string& ref_label,
                        const std::string& other_label) {
  auto ia = ref.begin();
  auto ib = other.begin();
  while (ia != ref.end() || ib != other.end()) {
    if (ib == other.end() || (ia != ref.end() && ia->first < ib->first)) {
      throw InputError("schema mismatch: tensor \"" + ia->first + "\" is present in " +
                       ref_label + " but missing from " + other_label);
    }
    if (ia == ref.end() || ib->first < ia->first) {
      throw InputError("schema mismatch: tensor \"" + ib->first + "\" is present in " +
                       other_label + " but missing from " + ref_label);
    }
    if (ia->second.dtype != ib->second.dtype) {
      throw InputError("schema mismatch: tensor \"" + ia->first + "\" is " +
                       std::string(to_string(ia->second.dtype)) + " in " + ref_label + " but " +
                       std::string(to_string(ib->second.dtype)) + " in " + other_label);
    }
    if (ia->second.shape != ib->second.shape) {
      throw InputError("schema mismatch: tensor \"" + ia->first + "\" has different shapes in " +
                       ref_label + " and " + other_label);
    }
    ++ia;
    ++ib;
  }
}

std::string location(const std::filesystem::path& path, std::uint64_t offset) {
  return "tensor store " + path.string() + ": byte " + std::to_string(offset) + ": ";
}

// Best-effort byte offset of the `occurrence`-th appearance of `name` as a
// serialized JSON key inside the header; falls back to the header start.
std::uint64_t offset_of_key(const std::string& header, const std::string& name, int occurrence) {
  const std::string needle = nlohmann::json(name).dump();
  std::size_t pos = 0;
  int seen = 0;
  while ((pos = header.find(needle, pos)) != std::string::npos) {
    if (++seen == occurrence) return 8 + pos;
    ++pos;
  }
  return 8;
}

}  // namespace

std::string_view to_string(Dtype dtype) {
  switch (dtype) {
    case Dtype::kF32:
      return "F32";
    case Dtype::kF16:
      return "F16";
  }
  throw ContractError("to_string: invalid dtype value");
}

std::optional<Dtype> parse_dtype(std::string_view name) {
  if (name == "F32") return Dtype::kF32;
  if (name == "F16") return Dtype::kF16;
  return std::nullopt;
}

std::size_t dtype_size(Dtype dtype) {
  switch (dtype) {
    case Dtype::kF32:
      return 4;
    case Dtype::kF16:
      return 2;
  }
  throw ContractError("dtype_size: invalid dtype value");
}

float half_to_float(std::uint16_t bits) {
  const bool negative = (bits & 0x8000u) != 0;
  const int exponent = (bits >> 10) & 0x1f;
  const std::uint32_t mantissa = bits & 0x3ffu;
  if (exponent == 0x1f) {
    if (mantissa == 0) {
      const float inf = std::numeric_limits<float>::infinity();
      return negative ? -inf : inf;
    }
    const std::uint32_t sign = negative ? 0x80000000u : 0u;
    return std::bit_cast<float>(sign | 0x7fc00000u | (mantissa << 13));
  }
  double value;
  if (exponent == 0) {
    value = std::ldexp(static_cast<double>(mantissa), -24);
  } else {
    value = std::ldexp(static_cast<double>(1024 + mantissa), exponent - 25);
  }
  const auto result = static_cast<float>(value);
  return negative ? -result : result;
}

std::uint16_t half_from_double(double value) {
  const std::uint16_t sign = std::signbit(value) ? 0x8000u : 0u;
  if (std::isnan(value)) return sign | 0x7e00u;
  if (std::isinf(value)) return sign | 0x7c00u;
  const double a = std::fabs(value);
  if (a < 0x1p-14) {
    // Subnormal target: units of 2^-24. A result of 1024 carries into the
    // exponent field and encodes the smallest normal, which is exactly right.
    const auto m = static_cast<std::uint16_t>(round_ties_to_even(a * 0x1p24));
    return sign | m;
  }
  int exponent = std::ilogb(a);
  if (exponent > 15) return sign | 0x7c00u;
  auto m = static_cast<std::uint32_t>(round_ties_to_even(std::scalbn(a, 10 - exponent)));
  if (m == 2048) {
    m = 1024;
    if (++exponent > 15) return sign | 0x7c00u;
  }
  return static_cast<std::uint16_t>(sign | ((exponent + 15) << 10) | (m - 1024));
}

std::size_t Tensor::num_elements() const {
  const auto n = element_count(shape);
  if (!n) throw ContractError("tensor shape has a negative dimension or overflows");
  return static_cast<std::size_t>(*n);
}

double Tensor::element(std::size_t index) const {
  const std::size_t esz = dtype_size(dtype);
  const std::size_t off = index * esz;
  if (off + esz > data.size()) throw ContractError("tensor element index out of range");
  if (dtype == Dtype::kF32) {
    return static_cast<double>(std::bit_cast<float>(load_le32(data.data() + off)));
  }
  return static_cast<double>(half_to_float(load_le16(data.data() + off)));
}

void Tensor::set_element(std::size_t index, double value) {
  const std::size_t esz = dtype_size(dtype);
  const std::size_t off = index * esz;
  if (off + esz > data.size()) throw ContractError("tensor element index out of range");
  if (dtype == Dtype::kF32) {
    store_le32(data.data() + off, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
  } else {
    store_le16(data.data() + off, half_from_double(value));
  }
}

std::vector<double> Tensor::to_doubles() const {
  const std::size_t n = num_elements();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = element(i);
  return out;
}

Tensor Tensor::from_doubles(Dtype dtype, std::vector<std::int64_t> shape,
                            std::span<const double> values) {
  Tensor t;
  t.dtype = dtype;
  t.shape = std::move(shape);
  const auto n = element_count(t.shape);
  if (!n) throw InputError("tensor shape has a negative dimension or overflows");
  if (*n != values.size()) {
    throw InputError("tensor shape requires " + std::to_string(*n) + " elements, got " +
                     std::to_string(values.size()));
  }
  t.data.resize(values.size() * dtype_size(dtype));
  for (std::size_t i = 0; i < values.size(); ++i) t.set_element(i, values[i]);
  return t;
}

const Tensor& TensorStore::at(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InputError("store has no tensor named \"" + name + "\"");
  return it->second;
}

void TensorStore::put(const std::string& name, Tensor tensor) {
  if (name == kMetadataKey) {
    throw InputError("tensor name \"" + name + "\" is reserved by the container format");
  }
  const auto n = element_count(tensor.shape);
  if (!n) {
    throw InputError("tensor \"" + name + "\": shape has a negative dimension or overflows");
  }
  const std::size_t esz = dtype_size(tensor.dtype);
  if (*n > std::numeric_limits<std::uint64_t>::max() / esz) {
    throw InputError("tensor \"" + name + "\": byte size overflows");
  }
  const std::uint64_t want = *n * esz;
  if (tensor.data.size() != want) {
    throw InputError("tensor \"" + name + "\": buffer holds " +
                     std::to_string(tensor.data.size()) + " bytes, dtype and shape require " +
                     std::to_string(want));
  }
  tensors_[name] = std::move(tensor);
}

StoreReader::StoreReader(std::filesystem::path file) : path_(std::move(file)) {
  in_.open(path_, std::ios::binary);
  if (!in_) throw InputError("cannot open tensor store: " + path_.string());
  in_.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in_.tellg());
  in_.seekg(0);

  if (file_size < 8) {
    throw FormatError(location(path_, 0) + "file holds " + std::to_string(file_size) +
                      " bytes, too short for the 8-byte header length");
  }
  std::array<std::uint8_t, 8> raw{};
  in_.read(reinterpret_cast<char*>(raw.data()), 8);
  std::uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i) header_len |= static_cast<std::uint64_t>(raw[i]) << (8 * i);
  if (header_len > file_size - 8) {
    throw FormatError(location(path_, 8) + "header declares " + std::to_string(header_len) +
                      " bytes but only " + std::to_string(file_size - 8) + " follow");
  }
  std::string header(header_len, '\0');
  in_.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in_) throw FormatError(location(path_, 8) + "failed to read the header");
  data_begin_ = 8 + header_len;
  const std::uint64_t data_size = file_size - data_begin_;

  // nlohmann keeps the last value for repeated keys, so duplicates have to
  // be caught from parse events before they collapse.
  std::vector<std::string> top_keys;
  const auto collect = [&top_keys](int depth, nlohmann::json::parse_event_t event,
                                   nlohmann::json& parsed) {
    if (depth == 1 && event == nlohmann::json::parse_event_t::key) {
      top_keys.push_back(parsed.get<std::string>());
    }
    return true;
  };
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(header, collect);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(location(path_, 8 + (e.byte > 0 ? e.byte - 1 : 0)) +
                      "header is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) {
    throw FormatError(location(path_, 8) + "header must be a JSON object");
  }
  {
    std::vector<std::string> sorted = top_keys;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) {
      throw FormatError(location(path_, offset_of_key(header, *dup, 2)) +
                        "duplicate tensor name \"" + *dup + "\"");
    }
  }

  for (const auto& [name, entry] : doc.items()) {
    if (name == kMetadataKey) continue;
    const std::uint64_t at = offset_of_key(header, name, 1);
    if (!entry.is_object()) {
      throw FormatError(location(path_, at) + "tensor \"" + name + "\" must map to an object");
    }
    for (const auto& [key, unused] : entry.items()) {
      (void)unused;
      if (key != "dtype" && key != "shape" && key != "data_offsets") {
        throw FormatError(location(path_, at) + "tensor \"" + name + "\" has unexpected key \"" +
                          key + "\"");
      }
    }
    if (!entry.contains("dtype") || !entry.contains("shape") || !entry.contains("data_offsets")) {
      throw FormatError(location(path_, at) + "tensor \"" + name +
                        "\" needs dtype, shape and data_offsets");
    }

    TensorInfo info;
    const auto& dtype_node = entry.at("dtype");
    if (!dtype_node.is_string()) {
      throw FormatError(location(path_, at) + "tensor \"" + name + "\": dtype must be a string");
    }
    const auto dtype = parse_dtype(dtype_node.get<std::string>());
    if (!dtype) {
      throw FormatError(location(path_, at) + "tensor \"" + name + "\": unknown dtype \"" +
                        dtype_node.get<std::string>() + "\"");
    }
    info.dtype = *dtype;

    const auto& shape_node = entry.at("shape");
    if (!shape_node.is_array()) {
      throw FormatError(location(path_, at) + "tensor \"" + name + "\": shape must be an array");
    }
    for (const auto& dim : shape_node) {
      if (!dim.is_number_integer() && !dim.is_number_unsigned()) {
        throw FormatError(location(path_, at) + "tensor \"" + name +
                          "\": shape entries must be integers");
      }
      if (dim.is_number_unsigned() &&
          dim.get<std::uint64_t>() >
              static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw FormatError(location(path_, at) + "tensor \"" + name +
                          "\": shape dimension too large");
      }
      const auto d = dim.get<std::int64_t>();
      if (d < 0) {
        throw FormatError(location(path_, at) + "tensor \"" + name +
                          "\": negative shape dimension " + std::to_string(d));
      }
      info.shape.push_back(d);
    }
    const auto n = element_count(info.shape);
    if (!n || *n > std::numeric_limits<std::uint64_t>::max() / dtype_size(info.dtype)) {
      throw FormatError(location(path_, at) + "tensor \"" + name + "\": shape overflows");
    }
    const std::uint64_t expected_bytes = *n * dtype_size(info.dtype);

    const auto& offs = entry.at("data_offsets");
    const auto valid_offset = [](const nlohmann::json& v) {
      return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    };
    if (!offs.is_array() || offs.size() != 2 || !valid_offset(offs[0]) || !valid_offset(offs[1])) {
      throw FormatError(location(path_, at) + "tensor \"" + name +
                        "\": data_offsets must be two non-negative integers");
    }
    info.begin = offs[0].get<std::uint64_t>();
    info.end = offs[1].get<std::uint64_t>();
    if (info.begin > info.end) {
      throw FormatError(location(path_, at) + "tensor \"" + name + "\": data_offsets [" +
                        std::to_string(info.begin) + ", " + std::to_string(info.end) +
                        "] are not ascending");
    }
    if (info.end > data_size) {
      throw FormatError(location(path_, at) + "tensor \"" + name + "\": data_offsets end " +
                        std::to_string(info.end) + " is beyond the " + std::to_string(data_size) +
                        "-byte data region");
    }
    if (info.end - info.begin != expected_bytes) {
      throw FormatError(location(path_, at) + "tensor \"" + name + "\": data_offsets span " +
                        std::to_string(info.end - info.begin) +
                        " bytes but dtype and shape require " + std::to_string(expected_bytes));
    }
    infos_.emplace(name, std::move(info));
  }

  // The payloads must tile the data region exactly: sorted by offset they
  // form one gapless, non-overlapping run.
  std::vector<std::tuple<std::uint64_t, std::uint64_t, const std::string*>> spans;
  spans.reserve(infos_.size());
  for (const auto& [name, info] : infos_) spans.emplace_back(info.begin, info.end, &name);
  std::sort(spans.begin(), spans.end());
  std::uint64_t cursor = 0;
  for (const auto& [begin, end, name] : spans) {
    if (begin != cursor) {
      throw FormatError(location(path_, data_begin_ + std::min(begin, cursor)) + "tensor \"" +
                        *name + "\" starts at data offset " + std::to_string(begin) +
                        " but the previous payload ends at " + std::to_string(cursor));
    }
    cursor = end;
  }
  if (cursor != data_size) {
    throw FormatError(location(path_, data_begin_ + cursor) + "payloads cover " +
                      std::to_string(cursor) + " bytes but the data region holds " +
                      std::to_string(data_size));
  }
}

Tensor StoreReader::read(const std::string& name) {
  const auto it = infos_.find(name);
  if (it == infos_.end()) {
    throw InputError("tensor store " + path_.string() + " has no tensor named \"" + name + "\"");
  }
  const TensorInfo& info = it->second;
  Tensor t;
  t.dtype = info.dtype;
  t.shape = info.shape;
  t.data.resize(info.end - info.begin);
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(data_begin_ + info.begin));
  in_.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
  if (!in_ && !t.data.empty()) {
    throw FormatError(location(path_, data_begin_ + info.begin) + "unexpected end of file while reading tensor \"" +
                      name + "\"");
  }
  return t;
}

TensorStore read_store(const std::filesystem::path& file) {
  StoreReader reader(file);
  TensorStore store;
  for (const auto& [name, info] : reader.infos()) {
    (void)info;
    store.put(name, reader.read(name));
  }
  return store;
}

namespace {

std::string render_header(const std::map<std::string, TensorInfo>& infos) {
  nlohmann::json header = nlohmann::json::object();
  for (const auto& [name, info] : infos) {
    header[name] = {{"dtype", to_string(info.dtype)},
                    {"shape", info.shape},
                    {"data_offsets", {info.begin, info.end}}};
  }
  return header.dump();
}

void write_prefix(std::ofstream& out, const std::string& header_text) {
  std::array<std::uint8_t, 8> raw{};
  const auto n = static_cast<std::uint64_t>(header_text.size());
  for (int i = 0; i < 8; ++i) raw[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(n >> (8 * i));
  out.write(reinterpret_cast<const char*>(raw.data()), 8);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
}

}  // namespace

void write_store(const TensorStore& store, const std::filesystem::path& file) {
  std::map<std::string, TensorInfo> infos;
  std::uint64_t cursor = 0;
  for (const auto& [name, tensor] : store.tensors()) {
    TensorInfo info;
    info.dtype = tensor.dtype;
    info.shape = tensor.shape;
    info.begin = cursor;
    cursor += tensor.data.size();
    info.end = cursor;
    infos.emplace(name, std::move(info));
  }

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write tensor store: " + file.string());
  write_prefix(out, render_header(infos));
  for (const auto& [name, tensor] : store.tensors()) {
    (void)name;
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size()));
  }
  out.flush();
  if (!out) throw InputError("write failed for tensor store: " + file.string());
}

TensorStore average(std::span<const TensorStore> stores) {
  if (stores.empty()) throw InputError("average needs at least one store");
  const TensorStore& first = stores.front();
  for (std::size_t i = 1; i < stores.size(); ++i) {
    check_schema_match(first.tensors(), stores[i].tensors(), "store 1",
                       "store " + std::to_string(i + 1));
  }

  TensorStore out;
  const auto k = static_cast<double>(stores.size());
  for (const auto& [name, t0] : first.tensors()) {
    const std::size_t n = t0.num_elements();
    std::vector<double> acc(n, 0.0);
    for (const TensorStore& store : stores) {
      const Tensor& t = store.tensors().at(name);
      for (std::size_t j = 0; j < n; ++j) acc[j] += t.element(j);
    }
    Tensor mean;
    mean.dtype = t0.dtype;
    mean.shape = t0.shape;
    mean.data.resize(t0.data.size());
    for (std::size_t j = 0; j < n; ++j) mean.set_element(j, acc[j] / k);
    out.put(name, std::move(mean));
  }
  return out;
}

void average_files(std::span<const std::filesystem::path> inputs,
                   const std::filesystem::path& out) {
  if (inputs.empty()) throw InputError("average needs at least one input file");
  for (const auto& input : inputs) {
    std::error_code ec;
    if (std::filesystem::equivalent(input, out, ec) && !ec) {
      throw InputError("output file " + out.string() + " is also an input");
    }
  }

  std::vector<StoreReader> readers;
  readers.reserve(inputs.size());
  for (const auto& input : inputs) readers.emplace_back(input);
  for (std::size_t i = 1; i < readers.size(); ++i) {
    check_schema_match(readers[0].infos(), readers[i].infos(), inputs[0].string(),
                       inputs[i].string());
  }

  std::map<std::string, TensorInfo> infos;
  std::uint64_t cursor = 0;
  for (const auto& [name, info] : readers[0].infos()) {
    TensorInfo fresh;
    fresh.dtype = info.dtype;
    fresh.shape = info.shape;
    fresh.begin = cursor;
    cursor += info.end - info.begin;
    fresh.end = cursor;
    infos.emplace(name, std::move(fresh));
  }

  std::ofstream sink(out, std::ios::binary | std::ios::trunc);
  if (!sink) throw InputError("cannot write tensor store: " + out.string());
  write_prefix(sink, render_header(infos));

  const auto k = static_cast<double>(readers.size());
  for (const auto& [name, info] : infos) {
    Tensor mean = readers[0].read(name);
    const std::size_t n = mean.num_elements();
    std::vector<double> acc = mean.to_doubles();
    for (std::size_t i = 1; i < readers.size(); ++i) {
      const Tensor t = readers[i].read(name);
      for (std::size_t j = 0; j < n; ++j) acc[j] += t.element(j);
    }
    for (std::size_t j = 0; j < n; ++j) mean.set_element(j, acc[j] / k);
    (void)info;
    sink.write(reinterpret_cast<const char*>(mean.data.data()),
               static_cast<std::streamsize>(mean.data.size()));
  }
  sink.flush();
  if (!sink) throw InputError("write failed for tensor store: " + out.string());
}

}  // namespace asrkit
