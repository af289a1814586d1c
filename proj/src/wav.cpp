// Copyright 2026 FaceTalk Authors
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

#include "facetalk/wav.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>

#include "facetalk/error.hpp"
#include "facetalk/io.hpp"

namespace facetalk::wav {

namespace {

void append_u32(std::string& s, uint32_t v) { s.append(reinterpret_cast<const char*>(&v), 4); }
void append_u16(std::string& s, uint16_t v) { s.append(reinterpret_cast<const char*>(&v), 2); }

}  // namespace

void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
  const uint32_t data_size = static_cast<uint32_t>(samples.size() * 2);
  std::string bytes;
  bytes.reserve(44 + data_size);
  bytes.append("RIFF", 4);
  append_u32(bytes, 36 + data_size);
  bytes.append("WAVE", 4);
  bytes.append("fmt ", 4);
  append_u32(bytes, 16);
  append_u16(bytes, 1);  // PCM
  append_u16(bytes, 1);  // mono
  append_u32(bytes, static_cast<uint32_t>(sample_rate));
  append_u32(bytes, static_cast<uint32_t>(sample_rate * 2));
  append_u16(bytes, 2);   // block align
  append_u16(bytes, 16);  // bits per sample
  bytes.append("data", 4);
  append_u32(bytes, data_size);
  for (double s : samples) {
    double c = std::clamp(s, -1.0, 1.0);
    int16_t pcm = static_cast<int16_t>(std::lround(c * 32767.0));
    bytes.append(reinterpret_cast<const char*>(&pcm), 2);
  }
  io::atomic_write_file(path, bytes);
}

WavData read_wav(const std::string& path) {
  const std::string bytes = io::read_file(path);
  if (bytes.size() < 44 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw IoError("not a RIFF/WAVE file: " + path);
  }
  size_t pos = 12;
  uint16_t channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  WavData out;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    uint32_t size = 0;
    std::memcpy(&size, bytes.data() + pos + 4, 4);
    pos += 8;
    if (pos + size > bytes.size()) throw IoError("truncated WAV chunk: " + path);
    if (id == "fmt ") {
      uint16_t fmt = 0;
      std::memcpy(&fmt, bytes.data() + pos, 2);
      std::memcpy(&channels, bytes.data() + pos + 2, 2);
      std::memcpy(&sample_rate, bytes.data() + pos + 4, 4);
      std::memcpy(&bits, bytes.data() + pos + 14, 2);
      if (fmt != 1 || channels != 1 || bits != 16) {
        throw IoError("only 16-bit PCM mono WAV supported: " + path);
      }
    } else if (id == "data") {
      const size_t n = size / 2;
      out.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        int16_t pcm = 0;
        std::memcpy(&pcm, bytes.data() + pos + 2 * i, 2);
        out.samples[i] = static_cast<double>(pcm) / 32767.0;
      }
    }
    pos += size + (size & 1);
  }
  if (sample_rate == 0 || out.samples.empty()) throw IoError("missing fmt/data chunk: " + path);
  out.sample_rate = static_cast<int>(sample_rate);
  return out;
}

}  // namespace facetalk::wav
