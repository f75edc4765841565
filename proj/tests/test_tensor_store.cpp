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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asrkit/errors.hpp"
#include "asrkit/tensor_store.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace asrkit;

namespace {

Tensor f32_tensor(std::vector<std::int64_t> shape, const std::vector<double>& values) {
  return Tensor::from_doubles(Dtype::kF32, std::move(shape), values);
}

TensorStore scalar_store(double value) {
  TensorStore store;
  store.put("w", f32_tensor({}, {value}));
  return store;
}

}  // namespace

TEST_CASE("dtype names round-trip") {
  CHECK(to_string(Dtype::kF32) == "F32");
  CHECK(to_string(Dtype::kF16) == "F16");
  CHECK(parse_dtype("F32") == Dtype::kF32);
  CHECK(parse_dtype("F16") == Dtype::kF16);
  CHECK_FALSE(parse_dtype("BF16").has_value());
  CHECK(dtype_size(Dtype::kF32) == 4);
  CHECK(dtype_size(Dtype::kF16) == 2);
}

TEST_CASE("half precision decodes reference bit patterns exactly") {
  CHECK(half_to_float(0x0000) == 0.0f);
  CHECK(std::signbit(half_to_float(0x8000)));
  CHECK(half_to_float(0x3C00) == 1.0f);
  CHECK(half_to_float(0xC000) == -2.0f);
  CHECK(half_to_float(0x7BFF) == 65504.0f);
  CHECK(half_to_float(0x0001) == 0x1.0p-24f);  // smallest subnormal
  CHECK(half_to_float(0x0400) == 0x1.0p-14f);  // smallest normal
  CHECK(half_to_float(0x7C00) == std::numeric_limits<float>::infinity());
  CHECK(std::isnan(half_to_float(0x7C01)));
}

TEST_CASE("half encoding rounds to nearest with ties to even") {
  CHECK(half_from_double(1.0) == 0x3C00);
  CHECK(half_from_double(-2.0) == 0xC000);
  CHECK(half_from_double(65504.0) == 0x7BFF);
  CHECK(half_from_double(65520.0) == 0x7C00);   // first value rounding to inf
  CHECK(half_from_double(0.0) == 0x0000);
  CHECK(half_from_double(-0.0) == 0x8000);

  // 1 + 2^-11 is exactly between 1.0 and the next half; the even mantissa
  // (1.0) must win. One step further up rounds away.
  CHECK(half_from_double(1.0 + 0x1.0p-11) == 0x3C00);
  CHECK(half_from_double(1.0 + 0x1.0p-11 + 0x1.0p-24) == 0x3C01);
  // Between the next pair the even neighbour is the upper one.
  CHECK(half_from_double(1.0 + 3 * 0x1.0p-11) == 0x3C02);

  // Subnormal ties: 1.5 * 2^-24 sits between 2^-24 and 2^-23.
  CHECK(half_from_double(0x1.8p-24) == 0x0002);
  CHECK(half_from_double(0x1.4p-24) == 0x0001);
  CHECK(half_from_double(0x1.0p-25) == 0x0000);  // halfway to zero, even wins

  CHECK(half_from_double(std::numeric_limits<double>::infinity()) == 0x7C00);
  CHECK((half_from_double(std::numeric_limits<double>::quiet_NaN()) & 0x7C00) == 0x7C00);
}

TEST_CASE("every non-NaN half round-trips through float") {
  for (std::uint32_t bits = 0; bits <= 0xFFFF; ++bits) {
    const auto h = static_cast<std::uint16_t>(bits);
    const float f = half_to_float(h);
    if (std::isnan(f)) continue;
    REQUIRE(half_from_double(static_cast<double>(f)) == h);
  }
}

TEST_CASE("tensors expose elements through doubles in both dtypes") {
  Tensor t = f32_tensor({2, 2}, {1.0, -2.5, 0.0, 4.0});
  CHECK(t.num_elements() == 4);
  CHECK(t.element(1) == -2.5);
  t.set_element(1, 7.0);
  CHECK(t.element(1) == 7.0);
  CHECK(t.to_doubles() == std::vector<double>{1.0, 7.0, 0.0, 4.0});

  Tensor h = Tensor::from_doubles(Dtype::kF16, {3}, std::vector<double>{1.0, 0.5, -0.25});
  CHECK(h.data.size() == 6);
  CHECK(h.element(2) == -0.25);
  // Storage rounds once to half precision.
  h.set_element(0, 1.0 + 0x1.0p-11);
  CHECK(h.element(0) == 1.0);
}

TEST_CASE("store insertion validates shape against buffer size") {
  TensorStore store;
  Tensor bad = f32_tensor({2}, {1.0, 2.0});
  bad.shape = {3};
  CHECK(testutil::throws_with<InputError>([&] { store.put("w", bad); }, "12"));

  Tensor negative = f32_tensor({2}, {1.0, 2.0});
  negative.shape = {-2};
  CHECK_THROWS_AS(store.put("w", negative), InputError);

  CHECK_THROWS_AS(store.put("__metadata__", f32_tensor({}, {1.0})), InputError);
  CHECK_THROWS_AS(store.at("absent"), InputError);

  store.put("w", f32_tensor({}, {1.0}));
  store.put("w", f32_tensor({}, {2.0}));  // overwrite, not accumulate
  CHECK(store.size() == 1);
  CHECK(store.at("w").element(0) == 2.0);
}

TEST_CASE("stores round-trip through the container format") {
  const auto dir = testutil::scratch_dir("store");

  TensorStore store;
  store.put("w", f32_tensor({2}, {0.0, 2.0}));
  write_store(store, dir / "w.st");
  CHECK(read_store(dir / "w.st") == store);

  const TensorStore empty;
  write_store(empty, dir / "empty.st");
  CHECK(read_store(dir / "empty.st") == empty);

  // Serialization is deterministic byte for byte.
  write_store(store, dir / "w2.st");
  CHECK(testutil::read_file(dir / "w.st") == testutil::read_file(dir / "w2.st"));
}

TEST_CASE("the reader exposes schema information without loading payloads") {
  const auto dir = testutil::scratch_dir("reader");
  TensorStore store;
  store.put("alpha", f32_tensor({2}, {1.0, 2.0}));
  store.put("beta", Tensor::from_doubles(Dtype::kF16, {1}, std::vector<double>{0.5}));
  write_store(store, dir / "s.st");

  StoreReader reader(dir / "s.st");
  REQUIRE(reader.infos().size() == 2);
  CHECK(reader.infos().at("alpha").dtype == Dtype::kF32);
  CHECK(reader.infos().at("beta").dtype == Dtype::kF16);
  CHECK(reader.read("alpha") == store.at("alpha"));
  CHECK(reader.read("beta") == store.at("beta"));
  CHECK_THROWS_AS(reader.read("gamma"), InputError);
}

namespace {

// Rebuilds a container file from a JSON header object and a payload blob.
void write_raw_store(const std::filesystem::path& file, const nlohmann::json& header,
                     const std::string& payload) {
  const std::string header_text = header.dump();
  std::string bytes;
  const auto n = static_cast<std::uint64_t>(header_text.size());
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((n >> (8 * i)) & 0xFF));
  bytes += header_text;
  bytes += payload;
  testutil::write_file(file, bytes);
}

}  // namespace

TEST_CASE("corrupt containers are rejected with format errors") {
  const auto dir = testutil::scratch_dir("corrupt");
  const std::string payload(8, '\0');

  write_raw_store(dir / "beyond.st",
                  {{"w", {{"dtype", "F32"}, {"shape", {2}}, {"data_offsets", {0, 16}}}}},
                  payload);
  CHECK_THROWS_AS(read_store(dir / "beyond.st"), FormatError);

  write_raw_store(dir / "gap.st",
                  {{"a", {{"dtype", "F32"}, {"shape", {1}}, {"data_offsets", {0, 4}}}},
                   {"b", {{"dtype", "F32"}, {"shape", {1}}, {"data_offsets", {5, 9}}}}},
                  std::string(9, '\0'));
  CHECK_THROWS_AS(read_store(dir / "gap.st"), FormatError);

  write_raw_store(dir / "overlap.st",
                  {{"a", {{"dtype", "F32"}, {"shape", {1}}, {"data_offsets", {0, 4}}}},
                   {"b", {{"dtype", "F32"}, {"shape", {1}}, {"data_offsets", {2, 6}}}}},
                  std::string(6, '\0'));
  CHECK_THROWS_AS(read_store(dir / "overlap.st"), FormatError);

  write_raw_store(dir / "span.st",
                  {{"w", {{"dtype", "F32"}, {"shape", {3}}, {"data_offsets", {0, 8}}}}},
                  payload);
  CHECK_THROWS_AS(read_store(dir / "span.st"), FormatError);

  write_raw_store(dir / "dtype.st",
                  {{"w", {{"dtype", "F64"}, {"shape", {1}}, {"data_offsets", {0, 8}}}}},
                  payload);
  CHECK_THROWS_AS(read_store(dir / "dtype.st"), FormatError);

  write_raw_store(dir / "negshape.st",
                  {{"w", {{"dtype", "F32"}, {"shape", {-2}}, {"data_offsets", {0, 8}}}}},
                  payload);
  CHECK_THROWS_AS(read_store(dir / "negshape.st"), FormatError);

  testutil::write_file(dir / "tiny.st", "abc");
  CHECK_THROWS_AS(read_store(dir / "tiny.st"), FormatError);

  // Header length claims more bytes than the file holds.
  std::string huge;
  for (int i = 0; i < 8; ++i) huge.push_back(i == 0 ? '\x7f' : '\0');
  testutil::write_file(dir / "hdr.st", huge);
  CHECK_THROWS_AS(read_store(dir / "hdr.st"), FormatError);

  testutil::write_file(dir / "notjson.st", std::string("\x02\0\0\0\0\0\0\0{]", 10));
  CHECK_THROWS_AS(read_store(dir / "notjson.st"), FormatError);
}

TEST_CASE("duplicate tensor names in a file are rejected") {
  const auto dir = testutil::scratch_dir("dup");
  std::string header = R"({"w":{"dtype":"F32","shape":[1],"data_offsets":[0,4]},)"
                       R"("w":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}})";
  std::string bytes;
  const auto n = static_cast<std::uint64_t>(header.size());
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((n >> (8 * i)) & 0xFF));
  bytes += header;
  bytes += std::string(8, '\0');
  testutil::write_file(dir / "dup.st", bytes);
  CHECK(testutil::throws_with<FormatError>([&] { read_store(dir / "dup.st"); }, "duplicate"));
}

TEST_CASE("a metadata entry is tolerated on read and skipped") {
  const auto dir = testutil::scratch_dir("meta");
  write_raw_store(dir / "meta.st",
                  {{"__metadata__", {{"format", "pt"}}},
                   {"w", {{"dtype", "F32"}, {"shape", {1}}, {"data_offsets", {0, 4}}}}},
                  std::string(4, '\0'));
  const TensorStore store = read_store(dir / "meta.st");
  CHECK(store.size() == 1);
  CHECK(store.contains("w"));
}

TEST_CASE("averaging two stores is elementwise") {
  TensorStore a;
  a.put("w", f32_tensor({2}, {0.0, 2.0}));
  TensorStore b;
  b.put("w", f32_tensor({2}, {2.0, 4.0}));
  const TensorStore mean = average(std::vector<TensorStore>{a, b});
  CHECK(mean.at("w").to_doubles() == std::vector<double>{1.0, 3.0});
}

TEST_CASE("fifteen scalar stores with values 1..15 average to exactly 8") {
  std::vector<TensorStore> stores;
  for (int i = 1; i <= 15; ++i) stores.push_back(scalar_store(static_cast<double>(i)));
  const TensorStore mean = average(stores);
  CHECK(mean.at("w").element(0) == 8.0);
}

TEST_CASE("averaging identical f32 stores reproduces them bit for bit") {
  oracle::Rng rng(0x7e450001);
  for (int k : {1, 2, 3, 7, 15}) {
    std::vector<double> values;
    for (int i = 0; i < 13; ++i) {
      values.push_back((rng.unit() - 0.5) * std::pow(10.0, rng.range(-30, 30)));
    }
    values.push_back(std::numeric_limits<double>::infinity());
    TensorStore store;
    store.put("w", f32_tensor({14}, values));
    const TensorStore mean = average(std::vector<TensorStore>(static_cast<std::size_t>(k), store));
    CHECK(mean.at("w").data == store.at("w").data);
  }
}

TEST_CASE("half stores average with a single rounding from the double mean") {
  oracle::Rng rng(0x7e450003);
  for (int round = 0; round < 100; ++round) {
    // Random half payloads, decoded back so the expectation starts from the
    // values actually stored.
    TensorStore a;
    TensorStore b;
    Tensor ta{Dtype::kF16, {4}, std::vector<std::uint8_t>(8)};
    Tensor tb = ta;
    for (std::size_t i = 0; i < 4; ++i) {
      ta.set_element(i, (rng.unit() - 0.5) * 8.0);
      tb.set_element(i, (rng.unit() - 0.5) * 8.0);
    }
    a.put("w", ta);
    b.put("w", tb);

    const TensorStore mean = average(std::vector<TensorStore>{a, b});
    for (std::size_t i = 0; i < 4; ++i) {
      const double want = static_cast<double>(
          half_to_float(half_from_double((ta.element(i) + tb.element(i)) / 2.0)));
      REQUIRE(mean.at("w").element(i) == want);
    }
  }
}

TEST_CASE("averaging rejects schema mismatches naming the first offender") {
  TensorStore a;
  a.put("alpha", f32_tensor({2}, {0.0, 1.0}));
  a.put("beta", f32_tensor({1}, {0.0}));
  TensorStore b = a;

  TensorStore wrong_shape = a;
  wrong_shape.put("beta", f32_tensor({2}, {0.0, 1.0}));
  CHECK(testutil::throws_with<InputError>(
      [&] { average(std::vector<TensorStore>{a, wrong_shape}); }, "beta"));

  TensorStore wrong_dtype = a;
  wrong_dtype.put("alpha", Tensor::from_doubles(Dtype::kF16, {2}, std::vector<double>{0.0, 1.0}));
  CHECK(testutil::throws_with<InputError>(
      [&] { average(std::vector<TensorStore>{a, wrong_dtype}); }, "alpha"));

  TensorStore missing;
  missing.put("alpha", f32_tensor({2}, {0.0, 1.0}));
  CHECK_THROWS_AS(average(std::vector<TensorStore>{a, missing}), InputError);

  CHECK_THROWS_AS(average(std::vector<TensorStore>{}), InputError);
}

TEST_CASE("disk averaging matches in-memory averaging") {
  const auto dir = testutil::scratch_dir("avgfiles");
  oracle::Rng rng(0x7e450002);

  std::vector<TensorStore> stores;
  std::vector<std::filesystem::path> files;
  for (int i = 0; i < 5; ++i) {
    TensorStore store;
    std::vector<double> v32(6);
    std::vector<double> v16(3);
    for (double& x : v32) x = rng.unit() * 4.0 - 2.0;
    for (double& x : v16) x = rng.unit() * 4.0 - 2.0;
    store.put("w32", f32_tensor({2, 3}, v32));
    store.put("w16", Tensor::from_doubles(Dtype::kF16, {3}, v16));
    files.push_back(dir / ("s" + std::to_string(i) + ".st"));
    write_store(store, files.back());
    stores.push_back(std::move(store));
  }

  average_files(files, dir / "mean.st");
  CHECK(read_store(dir / "mean.st") == average(stores));

  CHECK_THROWS_AS(average_files(std::vector<std::filesystem::path>{}, dir / "out.st"),
                  InputError);
  // Writing over an input would corrupt it mid-stream.
  CHECK_THROWS_AS(average_files(files, files[0]), InputError);
}
