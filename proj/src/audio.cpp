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

#include "asrkit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "asrkit/errors.hpp"

namespace asrkit {

namespace {

std::string location(const std::filesystem::path& path, std::uint64_t offset) {
  return "wav file " + path.string() + ": byte " + std::to_string(offset) + ": ";
}

std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

constexpr std::uint16_t kFormatPcm = 1;

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open wav file: " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12) {
    throw FormatError(location(file, 0) + "file holds " + std::to_string(bytes.size()) +
                      " bytes, too short for a RIFF header");
  }
  if (!std::equal(bytes.begin(), bytes.begin() + 4, "RIFF")) {
    throw FormatError(location(file, 0) + "missing RIFF signature");
  }
  if (!std::equal(bytes.begin() + 8, bytes.begin() + 12, "WAVE")) {
    throw FormatError(location(file, 8) + "RIFF form type is not WAVE");
  }
  const std::uint64_t riff_end = std::min<std::uint64_t>(8 + le32(bytes.data() + 4), bytes.size());

  bool have_fmt = false;
  int sample_rate = 0;
  std::vector<float> samples;
  bool have_data = false;

  std::uint64_t pos = 12;
  while (pos + 8 <= riff_end) {
    const std::string chunk_id(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                               bytes.begin() + static_cast<std::ptrdiff_t>(pos) + 4);
    const std::uint32_t chunk_size = le32(bytes.data() + pos + 4);
    const std::uint64_t body = pos + 8;
    if (body + chunk_size > riff_end) {
      throw FormatError(location(file, pos) + "chunk \"" + chunk_id + "\" declares " +
                        std::to_string(chunk_size) + " bytes but the file ends first");
    }

    if (chunk_id == "fmt ") {
      if (chunk_size < 16) {
        throw FormatError(location(file, pos) + "fmt chunk holds " + std::to_string(chunk_size) +
                          " bytes, expected at least 16");
      }
      const std::uint16_t format = le16(bytes.data() + body);
      if (format != kFormatPcm) {
        throw FormatError(location(file, body) + "fmt chunk: audio format " +
                          std::to_string(format) + ", only PCM (1) is supported");
      }
      const std::uint16_t channels = le16(bytes.data() + body + 2);
      if (channels != 1) {
        throw FormatError(location(file, body + 2) + "fmt chunk: " + std::to_string(channels) +
                          " channels, only mono is supported");
      }
      const std::uint32_t rate = le32(bytes.data() + body + 4);
      if (rate == 0 || rate > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        throw FormatError(location(file, body + 4) + "fmt chunk: invalid sample rate " +
                          std::to_string(rate));
      }
      const std::uint32_t byte_rate = le32(bytes.data() + body + 8);
      const std::uint16_t block_align = le16(bytes.data() + body + 12);
      const std::uint16_t bits = le16(bytes.data() + body + 14);
      if (bits != 16) {
        throw FormatError(location(file, body + 14) + "fmt chunk: " + std::to_string(bits) +
                          " bits per sample, only 16 is supported");
      }
      if (block_align != 2) {
        throw FormatError(location(file, body + 12) + "fmt chunk: block align " +
                          std::to_string(block_align) + ", expected 2 for 16-bit mono");
      }
      if (byte_rate != rate * 2) {
        throw FormatError(location(file, body + 8) + "fmt chunk: byte rate " +
                          std::to_string(byte_rate) + " does not equal sample rate x 2");
      }
      sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (chunk_id == "data") {
      if (!have_fmt) {
        throw FormatError(location(file, pos) + "data chunk appears before the fmt chunk");
      }
      if (chunk_size % 2 != 0) {
        throw FormatError(location(file, pos) + "data chunk holds " + std::to_string(chunk_size) +
                          " bytes, not a whole number of 16-bit samples");
      }
      const std::size_t count = chunk_size / 2;
      samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto raw = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
        samples[i] = static_cast<float>(raw) / 32768.0f;
      }
      have_data = true;
    }
    pos = body + chunk_size + (chunk_size % 2);  // chunks are word-aligned
  }

  if (!have_fmt) throw FormatError(location(file, 12) + "no fmt chunk found");
  if (!have_data) throw FormatError(location(file, 12) + "no data chunk found");

  AudioBuffer audio;
  audio.sample_rate = sample_rate;
  audio.samples = std::move(samples);
  return audio;
}

void write_wav(const AudioBuffer& audio, const std::filesystem::path& file) {
  if (audio.sample_rate <= 0) throw InputError("wav write: sample rate must be > 0");
  const std::uint64_t data_size = audio.samples.size() * 2;
  if (data_size > 0xffffffffULL - 36) {
    throw InputError("wav write: audio too long for a RIFF container");
  }

  std::vector<std::uint8_t> bytes;
  bytes.reserve(44 + data_size);
  bytes.insert(bytes.end(), {'R', 'I', 'F', 'F'});
  put32(bytes, static_cast<std::uint32_t>(36 + data_size));
  bytes.insert(bytes.end(), {'W', 'A', 'V', 'E'});
  bytes.insert(bytes.end(), {'f', 'm', 't', ' '});
  put32(bytes, 16);
  put16(bytes, kFormatPcm);
  put16(bytes, 1);  // channels
  put32(bytes, static_cast<std::uint32_t>(audio.sample_rate));
  put32(bytes, static_cast<std::uint32_t>(audio.sample_rate) * 2);  // byte rate
  put16(bytes, 2);   // block align
  put16(bytes, 16);  // bits per sample
  bytes.insert(bytes.end(), {'d', 'a', 't', 'a'});
  put32(bytes, static_cast<std::uint32_t>(data_size));
  for (const float s : audio.samples) {
    const long q = std::lround(static_cast<double>(s) * 32768.0);
    const auto clipped = static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
    put16(bytes, static_cast<std::uint16_t>(clipped));
  }

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write wav file: " + file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw InputError("write failed for wav file: " + file.string());
}

}  // namespace asrkit
