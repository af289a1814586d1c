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

#include "facetalk/params.hpp"

#include <cmath>

#include "facetalk/error.hpp"
#include "facetalk/io.hpp"

namespace facetalk::nn {

Mat& ParamStore::create(const std::string& name, int rows, int cols, bool trainable) {
  if (has(name)) throw ConfigError("parameter already exists: " + name);
  Entry e;
  e.value = Mat::Zero(rows, cols);
  e.m = Mat::Zero(rows, cols);
  e.v = Mat::Zero(rows, cols);
  e.trainable = trainable;
  return entries_.emplace(name, std::move(e)).first->second.value;
}

Mat& ParamStore::create_xavier(const std::string& name, int rows, int cols, Rng& rng,
                               bool trainable) {
  Mat& m = create(name, rows, cols, trainable);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

Mat& ParamStore::create_gaussian(const std::string& name, int rows, int cols, double stddev,
                                 Rng& rng, bool trainable) {
  Mat& m = create(name, rows, cols, trainable);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = stddev * rng.gaussian();
  }
  return m;
}

Mat& ParamStore::value(const std::string& name) { return entry(name).value; }

const Mat& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second.value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::adam_step(const std::map<std::string, Mat>& grads, double lr, int64_t t,
                           double beta1, double beta2, double eps) {
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (const auto& [name, g] : grads) {
    Entry& e = entry(name);
    if (!e.trainable) continue;
    if (g.rows() != e.value.rows() || g.cols() != e.value.cols()) {
      throw ShapeMismatch("adam_step: gradient shape mismatch for " + name);
    }
    e.m = beta1 * e.m + (1.0 - beta1) * g;
    e.v = beta2 * e.v + (1.0 - beta2) * g.cwiseProduct(g);
    e.value.array() -=
        lr * (e.m.array() / bc1) / ((e.v.array() / bc2).sqrt() + eps);
  }
}

nlohmann::json ParamStore::shape_table() const {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, e] : entries_) {
    table.push_back({{"name", name},
                     {"rows", e.value.rows()},
                     {"cols", e.value.cols()},
                     {"trainable", e.trainable}});
  }
  return table;
}

std::vector<double> ParamStore::serialize() const {
  std::vector<double> out;
  for (const auto& [name, e] : entries_) {
    (void)name;
    out.insert(out.end(), e.value.data(), e.value.data() + e.value.size());
    out.insert(out.end(), e.m.data(), e.m.data() + e.m.size());
    out.insert(out.end(), e.v.data(), e.v.data() + e.v.size());
  }
  return out;
}

ParamStore ParamStore::deserialize(const nlohmann::json& shape_table,
                                   const std::vector<double>& payload) {
  ParamStore store;
  size_t off = 0;
  for (const auto& row : shape_table) {
    const std::string name = row.at("name").get<std::string>();
    const int rows = row.at("rows").get<int>();
    const int cols = row.at("cols").get<int>();
    Entry e;
    e.trainable = row.at("trainable").get<bool>();
    const size_t n = static_cast<size_t>(rows) * cols;
    if (off + 3 * n > payload.size()) throw IoError("checkpoint payload too small");
    e.value = Eigen::Map<const Mat>(payload.data() + off, rows, cols);
    off += n;
    e.m = Eigen::Map<const Mat>(payload.data() + off, rows, cols);
    off += n;
    e.v = Eigen::Map<const Mat>(payload.data() + off, rows, cols);
    off += n;
    store.entries_.emplace(name, std::move(e));
  }
  if (off != payload.size()) throw IoError("checkpoint payload size mismatch");
  return store;
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw ConfigError("parameter not bound: " + name);
  return it->second;
}

BoundParams bind_params(Tape& tape, const ParamStore& store) {
  BoundParams bound;
  for (const auto& [name, e] : store.entries()) {
    bound.vars[name] = e.trainable ? tape.leaf(e.value) : tape.constant(e.value);
  }
  return bound;
}

std::map<std::string, Mat> collect_grads(const Tape& tape, const ParamStore& store,
                                         const BoundParams& bound) {
  std::map<std::string, Mat> grads;
  for (const auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    const Mat& g = tape.grad(bound[name]);
    if (g.size() == 0) continue;  // parameter unused in this pass
    grads[name] = g;
  }
  return grads;
}

void Checkpoint::save(const std::string& path) const {
  nlohmann::json header = {{"kind", "checkpoint"}, {"format", 1},      {"stage", stage},
                           {"step", step},         {"config_hash", config_hash},
                           {"tensors", params.shape_table()},          {"extra", extra}};
  io::write_blob(path, header, params.serialize());
}

Checkpoint Checkpoint::load(const std::string& path) {
  io::Blob blob = io::read_blob(path);
  if (blob.header.value("kind", "") != "checkpoint") {
    throw IoError("not a checkpoint blob: " + path);
  }
  Checkpoint ck;
  ck.stage = blob.header.at("stage").get<std::string>();
  ck.step = blob.header.at("step").get<int64_t>();
  ck.config_hash = blob.header.at("config_hash").get<uint64_t>();
  ck.extra = blob.header.value("extra", nlohmann::json::object());
  ck.params = ParamStore::deserialize(blob.header.at("tensors"), blob.payload);
  return ck;
}

}  // namespace facetalk::nn
