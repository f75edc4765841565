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

#include "asrkit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "asrkit/errors.hpp"
#include "json.hpp"

namespace asrkit {

namespace {

std::string format_factor(double factor) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", factor);
  return buf;
}

std::string sanitize_filename(std::string_view id) {
  std::string out;
  out.reserve(id.size());
  for (const char c : id) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    out.push_back(keep ? c : '_');
  }
  return out;
}

}  // namespace

void validate_policy(const AugmentPolicy& policy) {
  if (policy.speed_factors.empty()) {
    throw InputError("augment policy: speed_factors must not be empty");
  }
  for (const double f : policy.speed_factors) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw InputError("augment policy: speed factor " + format_factor(f) + " must be > 0");
    }
  }
  if (!(policy.volume_lo > 0.0) || !(policy.volume_hi >= policy.volume_lo) ||
      !std::isfinite(policy.volume_hi)) {
    throw InputError("augment policy: volume range must satisfy 0 < lo <= hi");
  }
}

AugmentPolicy load_policy(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open augment policy: " + file.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("augment policy " + file.string() + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw FormatError("augment policy " + file.string() + ": top-level value must be an object");
  }
  AugmentPolicy policy;
  for (const auto& [key, value] : doc.items()) {
    if (key == "speed_factors") {
      if (!value.is_array() || value.empty()) {
        throw FormatError("augment policy " + file.string() +
                          ": speed_factors must be a non-empty array");
      }
      policy.speed_factors.clear();
      for (const auto& f : value) {
        if (!f.is_number()) {
          throw FormatError("augment policy " + file.string() +
                            ": speed_factors entries must be numbers");
        }
        policy.speed_factors.push_back(f.get<double>());
      }
    } else if (key == "volume_range") {
      if (!value.is_array() || value.size() != 2 || !value[0].is_number() ||
          !value[1].is_number()) {
        throw FormatError("augment policy " + file.string() +
                          ": volume_range must be [lo, hi]");
      }
      policy.volume_lo = value[0].get<double>();
      policy.volume_hi = value[1].get<double>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned() && !value.is_number_integer()) {
        throw FormatError("augment policy " + file.string() + ": seed must be an integer");
      }
      policy.seed = value.get<std::uint64_t>();
    } else {
      throw FormatError("augment policy " + file.string() + ": unexpected key \"" + key + "\"");
    }
  }
  validate_policy(policy);
  return policy;
}

AudioBuffer perturb_volume(const AudioBuffer& audio, double gain) {
  if (!(gain > 0.0) || !std::isfinite(gain)) throw InputError("volume gain must be > 0");
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.resize(audio.samples.size());
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    const double scaled = static_cast<double>(audio.samples[i]) * gain;
    out.samples[i] = static_cast<float>(std::clamp(scaled, -1.0, 1.0));
  }
  return out;
}

AudioBuffer perturb_speed(const AudioBuffer& audio, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw InputError("speed factor must be > 0");
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  const std::size_t len = audio.samples.size();
  if (len == 0) return out;

  // Largest n with (n-1) x factor inside the input, so the nominal
  // floor(len/factor) is corrected when the division rounds badly.
  auto out_len = static_cast<std::size_t>(std::floor(static_cast<double>(len) / factor));
  while (out_len > 0 && static_cast<double>(out_len - 1) * factor >= static_cast<double>(len)) {
    --out_len;
  }
  while (static_cast<double>(out_len) * factor < static_cast<double>(len)) ++out_len;

  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * factor;
    auto i0 = static_cast<std::size_t>(pos);
    if (i0 > len - 1) i0 = len - 1;
    const double frac = pos - static_cast<double>(i0);
    if (frac <= 0.0 || i0 + 1 >= len) {
      out.samples[i] = audio.samples[i0];
    } else {
      const double a = audio.samples[i0];
      const double b = audio.samples[i0 + 1];
      out.samples[i] = static_cast<float>(a + frac * (b - a));
    }
  }
  return out;
}

double volume_gain_for(const AugmentPolicy& policy, std::string_view utterance_id) {
  if (!(policy.volume_lo > 0.0) || !(policy.volume_hi >= policy.volume_lo)) {
    throw InputError("augment policy: volume range must satisfy 0 < lo <= hi");
  }
  std::uint64_t h = 14695981039346656037ULL;
  for (const char c : utterance_id) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::uint64_t z = h + 0x9e3779b97f4a7c15ULL * (policy.seed + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  const double u = static_cast<double>(z >> 11) * 0x1p-53;
  return policy.volume_lo + u * (policy.volume_hi - policy.volume_lo);
}

AugmentResult apply_policy(std::span<const ManifestEntry> manifest, const AugmentPolicy& policy,
                           const std::filesystem::path& out_dir) {
  validate_policy(policy);
  AugmentResult result;
  if (manifest.empty()) return result;

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw InputError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  }

  std::unordered_set<std::string> used_names;
  const auto claim_name = [&used_names](const std::string& id) {
    std::string base = sanitize_filename(id);
    std::string name = base + ".wav";
    for (int k = 2; !used_names.insert(name).second; ++k) {
      name = base + "-" + std::to_string(k) + ".wav";
    }
    return name;
  };

  for (const ManifestEntry& entry : manifest) {
    try {
      const AudioBuffer audio = read_wav(entry.audio_path);

      std::vector<ManifestEntry> copies;
      std::vector<AudioBuffer> buffers;
      for (const double factor : policy.speed_factors) {
        ManifestEntry copy = entry;
        copy.utterance_id = entry.utterance_id + "#sp" + format_factor(factor);
        copy.duration_s = entry.duration_s / factor;
        copies.push_back(std::move(copy));
        buffers.push_back(perturb_speed(audio, factor));
      }
      {
        ManifestEntry copy = entry;
        copy.utterance_id = entry.utterance_id + "#vol";
        copies.push_back(std::move(copy));
        buffers.push_back(perturb_volume(audio, volume_gain_for(policy, entry.utterance_id)));
      }

      for (std::size_t i = 0; i < copies.size(); ++i) {
        const std::filesystem::path target = out_dir / claim_name(copies[i].utterance_id);
        write_wav(buffers[i], target);
        copies[i].audio_path = target.string();
      }
      for (ManifestEntry& copy : copies) result.entries.push_back(std::move(copy));
    } catch (const InputError& e) {
      result.failures.push_back({entry.utterance_id, e.what()});
    } catch (const FormatError& e) {
      result.failures.push_back({entry.utterance_id, e.what()});
    }
  }

  if (result.failures.size() == manifest.size()) {
    std::string message = "augment: all " + std::to_string(manifest.size()) + " entries failed:";
    for (const AugmentFailure& failure : result.failures) {
      message += "\n  " + failure.utterance_id + ": " + failure.message;
    }
    throw InputError(message);
  }
  return result;
}

}  // namespace asrkit
