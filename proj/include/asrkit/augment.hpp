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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asrkit/audio.hpp"
#include "asrkit/manifest.hpp"

namespace asrkit {

struct AugmentPolicy {
  std::vector<double> speed_factors{0.9, 1.1};
  double volume_lo = 0.15;
  double volume_hi = 1.15;
  std::uint64_t seed = 0;
};

// JSON document with optional keys speed_factors, volume_range ([lo, hi])
// and seed; absent keys keep the defaults above.
AugmentPolicy load_policy(const std::filesystem::path& file);

// Throws InputError unless every speed factor is > 0 and 0 < lo <= hi.
void validate_policy(const AugmentPolicy& policy);

// Multiplies every sample by `gain` and clamps to [-1, 1]. Length and
// sample rate are unchanged; gain 1 is the identity.
AudioBuffer perturb_volume(const AudioBuffer& audio, double gain);

// Resamples by linear interpolation at read positions i x factor, so the
// output plays `factor` times faster at the same sample rate and pitch
// shifts with speed. Output length is within one sample of length/factor.
AudioBuffer perturb_speed(const AudioBuffer& audio, double factor);

// Uniform draw from [volume_lo, volume_hi] derived by hashing the utterance
// id with the policy seed, so results do not depend on processing order.
double volume_gain_for(const AugmentPolicy& policy, std::string_view utterance_id);

struct AugmentFailure {
  std::string utterance_id;
  std::string message;
};

struct AugmentResult {
  std::vector<ManifestEntry> entries;
  std::vector<AugmentFailure> failures;
};

// For each input utterance, writes one copy per speed factor (id suffix
// `#sp<factor>`, duration divided by the factor) plus one volume copy
// (suffix `#vol`) into out_dir, and returns the manifest of the copies.
// Unreadable or unwritable utterances are recorded as failures and skipped;
// if every entry of a non-empty manifest fails, an InputError carrying all
// diagnostics is thrown. Output is deterministic for a fixed seed.
AugmentResult apply_policy(std::span<const ManifestEntry> manifest, const AugmentPolicy& policy,
                           const std::filesystem::path& out_dir);

}  // namespace asrkit
