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

#include "facetalk/layers.hpp"

#include <cmath>

#include "facetalk/error.hpp"

namespace facetalk::nn {

void init_linear(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng) {
  store.create_xavier(prefix + ".w", in, out, rng);
  store.create(prefix + ".b", 1, out);
}

Var linear(Tape& t, const BoundParams& p, const std::string& prefix, Var x) {
  return t.add_row_broadcast(t.matmul(x, p[prefix + ".w"]), p[prefix + ".b"]);
}

void init_layer_norm(ParamStore& store, const std::string& prefix, int dim) {
  store.create(prefix + ".gamma", 1, dim).setOnes();
  store.create(prefix + ".beta", 1, dim);
}

Var layer_norm(Tape& t, const BoundParams& p, const std::string& prefix, Var x, double eps) {
  const int d = static_cast<int>(t.val(x).cols());
  Var mu = t.scale(t.row_sum(x), 1.0 / d);                       // N x 1
  Var xc = t.add_col_broadcast(x, t.scale(mu, -1.0));            // x - mu
  Var var = t.scale(t.row_sum(t.square(xc)), 1.0 / d);           // N x 1
  Var inv = t.reciprocal(t.sqrt_(t.add_scalar(var, eps)));       // N x 1
  Var norm = t.mul_col_broadcast(xc, inv);
  return t.add_row_broadcast(t.mul_row_broadcast(norm, p[prefix + ".gamma"]), p[prefix + ".beta"]);
}

void init_lstm(ParamStore& store, const std::string& prefix, int in, int hidden, Rng& rng) {
  store.create_xavier(prefix + ".w", in + hidden, 4 * hidden, rng);
  Mat& b = store.create(prefix + ".b", 1, 4 * hidden);
  b.block(0, hidden, 1, hidden).setOnes();  // forget-gate bias
}

LstmState lstm_cell(Tape& t, const BoundParams& p, const std::string& prefix, Var x,
                    const LstmState& state, int hidden) {
  Var cat = t.concat_cols(x, state.h);
  Var z = t.add_row_broadcast(t.matmul(cat, p[prefix + ".w"]), p[prefix + ".b"]);
  Var i = t.sigmoid(t.slice_cols(z, 0, hidden));
  Var f = t.sigmoid(t.slice_cols(z, hidden, hidden));
  Var g = t.tanh_(t.slice_cols(z, 2 * hidden, hidden));
  Var o = t.sigmoid(t.slice_cols(z, 3 * hidden, hidden));
  LstmState next;
  next.c = t.add(t.mul(f, state.c), t.mul(i, g));
  next.h = t.mul(o, t.tanh_(next.c));
  return next;
}

Var lstm_seq(Tape& t, const BoundParams& p, const std::string& prefix, Var x, int hidden,
             bool reverse) {
  const int steps = static_cast<int>(t.val(x).rows());
  LstmState s{t.zeros(1, hidden), t.zeros(1, hidden)};
  std::vector<Var> outs(steps);
  for (int k = 0; k < steps; ++k) {
    int row = reverse ? steps - 1 - k : k;
    s = lstm_cell(t, p, prefix, t.slice_rows(x, row, 1), s, hidden);
    outs[row] = s.h;
  }
  return t.stack_rows(outs);
}

void init_bilstm(ParamStore& store, const std::string& prefix, int in, int hidden, Rng& rng) {
  init_lstm(store, prefix + ".fwd", in, hidden, rng);
  init_lstm(store, prefix + ".bwd", in, hidden, rng);
}

Var bilstm_seq(Tape& t, const BoundParams& p, const std::string& prefix, Var x, int hidden) {
  Var f = lstm_seq(t, p, prefix + ".fwd", x, hidden, false);
  Var b = lstm_seq(t, p, prefix + ".bwd", x, hidden, true);
  return t.concat_cols(f, b);
}

void init_conv1d(ParamStore& store, const std::string& prefix, int cin, int cout, int k, Rng& rng) {
  store.create_xavier(prefix + ".w", cout, k * cin, rng);
  store.create(prefix + ".b", cout, 1);
}

Var conv1d(Tape& t, const BoundParams& p, const std::string& prefix, Var x, int k) {
  return t.conv1d_same(x, p[prefix + ".w"], p[prefix + ".b"], k);
}

void init_conv2d(ParamStore& store, const std::string& prefix, int cin, int cout, int k, Rng& rng) {
  store.create_xavier(prefix + ".w", cout, k * k * cin, rng);
  store.create(prefix + ".b", cout, 1);
}

Var conv2d(Tape& t, const BoundParams& p, const std::string& prefix, Var x, int cin, int h, int w,
           int k, int stride, int pad) {
  return t.conv2d(x, p[prefix + ".w"], p[prefix + ".b"], cin, h, w, k, stride, pad);
}

namespace {

// Shared per-channel normalization over columns of a C x T matrix.
Var normalize_channels(Tape& t, Var x, double eps) {
  Var mu = t.row_mean(x);                                      // C x 1
  Var xc = t.add_col_broadcast(x, t.scale(mu, -1.0));
  Var var = t.row_mean(t.square(xc));                          // C x 1
  Var inv = t.reciprocal(t.sqrt_(t.add_scalar(var, eps)));
  return t.mul_col_broadcast(xc, inv);
}

}  // namespace

void init_instance_norm(ParamStore& store, const std::string& prefix, int channels) {
  store.create(prefix + ".gamma", channels, 1).setOnes();
  store.create(prefix + ".beta", channels, 1);
}

Var instance_norm(Tape& t, const BoundParams& p, const std::string& prefix, Var x, double eps) {
  Var norm = normalize_channels(t, x, eps);
  return t.add_col_broadcast(t.mul_col_broadcast(norm, p[prefix + ".gamma"]),
                             p[prefix + ".beta"]);
}

void init_batch_norm(ParamStore& store, const std::string& prefix, int channels) {
  store.create(prefix + ".gamma", channels, 1).setOnes();
  store.create(prefix + ".beta", channels, 1);
  store.create(prefix + ".running_mean", channels, 1, /*trainable=*/false);
  store.create(prefix + ".running_var", channels, 1, /*trainable=*/false).setOnes();
}

Var batch_norm(Tape& t, const BoundParams& p, const std::string& prefix, Var x, bool training,
               ParamStore* store, double momentum, double eps) {
  Var norm;
  if (training) {
    norm = normalize_channels(t, x, eps);
    if (store != nullptr) {
      const Mat& xv = t.val(x);
      Mat mu = xv.rowwise().mean();
      Mat centered = xv.colwise() - mu.col(0);
      Mat var = centered.cwiseProduct(centered).rowwise().mean();
      Mat& rm = store->value(prefix + ".running_mean");
      Mat& rv = store->value(prefix + ".running_var");
      rm = (1.0 - momentum) * rm + momentum * mu;
      rv = (1.0 - momentum) * rv + momentum * var;
    }
  } else {
    Var rm = p[prefix + ".running_mean"];
    Var rv = p[prefix + ".running_var"];
    Var xc = t.add_col_broadcast(x, t.scale(rm, -1.0));
    Var inv = t.reciprocal(t.sqrt_(t.add_scalar(rv, eps)));
    norm = t.mul_col_broadcast(xc, inv);
  }
  return t.add_col_broadcast(t.mul_col_broadcast(norm, p[prefix + ".gamma"]),
                             p[prefix + ".beta"]);
}

Var l2_normalize_rows(Tape& t, Var x, double eps) {
  Var sq = t.row_sum(t.square(x));                       // N x 1
  Var inv = t.reciprocal(t.sqrt_(t.add_scalar(sq, eps)));
  return t.mul_col_broadcast(x, inv);
}

}  // namespace facetalk::nn
