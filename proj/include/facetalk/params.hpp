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
#include <map>
#include <string>

#include <json.hpp>

#include "facetalk/rng.hpp"
#include "facetalk/tape.hpp"

namespace facetalk::nn {

// Named parameter tensors plus Adam moments. std::map keeps iteration order
// deterministic, which the checkpoint layout and Adam stepping rely on.
class ParamStore {
 public:
  struct Entry {
    Mat value;
    Mat m;  // Adam first moment
    Mat v;  // Adam second moment
    bool trainable = true;
  };

  Mat& create(const std::string& name, int rows, int cols, bool trainable = true);
  Mat& create_xavier(const std::string& name, int rows, int cols, Rng& rng,
                     bool trainable = true);
  Mat& create_gaussian(const std::string& name, int rows, int cols, double stddev, Rng& rng,
                       bool trainable = true);

  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  Mat& value(const std::string& name);
  const Mat& value(const std::string& name) const;
  Entry& entry(const std::string& name);
  const std::map<std::string, Entry>& entries() const { return entries_; }
  void set_trainable(const std::string& name, bool trainable) { entry(name).trainable = trainable; }
  // Inserts or replaces a whole entry (value + optimizer state).
  void put(const std::string& name, Entry entry) { entries_[name] = std::move(entry); }

  // One Adam update over every trainable entry with a gradient present.
  // `t` is the 1-based global step used for bias correction.
  void adam_step(const std::map<std::string, Mat>& grads, double lr, int64_t t,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  nlohmann::json shape_table() const;
  std::vector<double> serialize() const;
  static ParamStore deserialize(const nlohmann::json& shape_table,
                                const std::vector<double>& payload);

 private:
  std::map<std::string, Entry> entries_;
};

// All parameters bound onto one tape for a forward pass; frozen entries
// become constants so no gradient work is spent on them.
struct BoundParams {
  std::map<std::string, Var> vars;
  Var operator[](const std::string& name) const;
  bool has(const std::string& name) const { return vars.count(name) > 0; }
};

BoundParams bind_params(Tape& tape, const ParamStore& store);

// Gradients of all trainable bound parameters after tape.backward().
std::map<std::string, Mat> collect_grads(const Tape& tape, const ParamStore& store,
                                         const BoundParams& bound);

// Stage checkpoint: parameters + step counter + config fingerprint, written
// atomically as a single blob.
struct Checkpoint {
  std::string stage;
  int64_t step = 0;
  uint64_t config_hash = 0;
  ParamStore params;
  nlohmann::json extra;  // stage-specific scalars (schedules, norms, ...)

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace facetalk::nn
