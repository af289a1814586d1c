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

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace facetalk::io {

std::string read_file(const std::string& path);

// Writes to <path>.tmp then renames, so readers never observe partial files.
void atomic_write_file(const std::string& path, const std::string& bytes);

// Binary blob container used for mel tensors and checkpoints:
// 8-byte magic, u32 header length, JSON header, little-endian float64 payload.
// The header carries a "kind" tag and a shape/name table for the payload.
inline constexpr char kBlobMagic[8] = {'F', 'T', 'B', 'L', 'O', 'B', '0', '1'};

struct Blob {
  nlohmann::json header;
  std::vector<double> payload;
};

void write_blob(const std::string& path, const nlohmann::json& header,
                const std::vector<double>& payload);
Blob read_blob(const std::string& path);

nlohmann::json parse_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j, int indent = 2);

// 64-bit FNV-1a, used to fingerprint configs inside checkpoints.
uint64_t fnv1a64(const std::string& bytes);

}  // namespace facetalk::io
