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

#include <filesystem>
#include <vector>

namespace asrkit {

// Mono PCM audio held as floats in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }

  bool operator==(const AudioBuffer&) const = default;
};

// Reads a RIFF/WAVE file. Only PCM, 16-bit signed little-endian, mono is
// accepted; anything else raises FormatError naming the offending chunk or
// field. Samples are scaled by 1/32768.
AudioBuffer read_wav(const std::filesystem::path& file);

// Writes the canonical 44-byte-header PCM layout. Samples are quantized by
// round-half-away-from-zero at 16-bit full scale and clamped to the int16
// range, so writing a buffer read from disk reproduces the file bit-exactly.
void write_wav(const AudioBuffer& audio, const std::filesystem::path& file);

}  // namespace asrkit
