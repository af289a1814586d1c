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

#include "facetalk/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "facetalk/error.hpp"

namespace facetalk::io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void atomic_write_file(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + tmp + " -> " + path + ": " + ec.message());
}

void write_blob(const std::string& path, const nlohmann::json& header,
                const std::vector<double>& payload) {
  const std::string hdr = header.dump();
  std::string bytes;
  bytes.reserve(sizeof(kBlobMagic) + 4 + hdr.size() + payload.size() * sizeof(double));
  bytes.append(kBlobMagic, sizeof(kBlobMagic));
  uint32_t hlen = static_cast<uint32_t>(hdr.size());
  bytes.append(reinterpret_cast<const char*>(&hlen), 4);
  bytes.append(hdr);
  bytes.append(reinterpret_cast<const char*>(payload.data()), payload.size() * sizeof(double));
  atomic_write_file(path, bytes);
}

Blob read_blob(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < sizeof(kBlobMagic) + 4 ||
      std::memcmp(bytes.data(), kBlobMagic, sizeof(kBlobMagic)) != 0) {
    throw IoError("not a blob file: " + path);
  }
  uint32_t hlen = 0;
  std::memcpy(&hlen, bytes.data() + sizeof(kBlobMagic), 4);
  const size_t header_off = sizeof(kBlobMagic) + 4;
  if (bytes.size() < header_off + hlen) throw IoError("truncated blob header: " + path);
  Blob blob;
  blob.header = nlohmann::json::parse(bytes.substr(header_off, hlen));
  const size_t payload_off = header_off + hlen;
  const size_t payload_bytes = bytes.size() - payload_off;
  if (payload_bytes % sizeof(double) != 0) throw IoError("misaligned blob payload: " + path);
  blob.payload.resize(payload_bytes / sizeof(double));
  std::memcpy(blob.payload.data(), bytes.data() + payload_off, payload_bytes);
  return blob;
}

nlohmann::json parse_json_file(const std::string& path) {
  return nlohmann::json::parse(read_file(path));
}

void write_json_file(const std::string& path, const nlohmann::json& j, int indent) {
  atomic_write_file(path, j.dump(indent) + "\n");
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace facetalk::io
