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

#include <string>

#include "facetalk/params.hpp"
#include "facetalk/tape.hpp"

namespace facetalk::nn {

// Parameter creation (one-time, at model init) and the matching forward
// ops. Naming convention: "<prefix>.w", "<prefix>.b", "<prefix>.gamma", ...

void init_linear(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng);
// x: N x in -> N x out
Var linear(Tape& t, const BoundParams& p, const std::string& prefix, Var x);

void init_layer_norm(ParamStore& store, const std::string& prefix, int dim);
// Per-row normalization with learned affine. x: N x D.
Var layer_norm(Tape& t, const BoundParams& p, const std::string& prefix, Var x,
               double eps = 1e-5);

void init_lstm(ParamStore& store, const std::string& prefix, int in, int hidden, Rng& rng);
// x: T x in -> T x hidden. Zero initial state; set reverse for a backward pass.
Var lstm_seq(Tape& t, const BoundParams& p, const std::string& prefix, Var x, int hidden,
             bool reverse = false);

void init_bilstm(ParamStore& store, const std::string& prefix, int in, int hidden, Rng& rng);
// x: T x in -> T x 2*hidden (forward and backward passes concatenated).
Var bilstm_seq(Tape& t, const BoundParams& p, const std::string& prefix, Var x, int hidden);

// Single LSTM cell step used by autoregressive decoders.
// x: 1 x in, h/c: 1 x hidden.
struct LstmState {
  Var h, c;
};
LstmState lstm_cell(Tape& t, const BoundParams& p, const std::string& prefix, Var x,
                    const LstmState& state, int hidden);

void init_conv1d(ParamStore& store, const std::string& prefix, int cin, int cout, int k, Rng& rng);
// x: Cin x T -> Cout x T (same padding).
Var conv1d(Tape& t, const BoundParams& p, const std::string& prefix, Var x, int k);

void init_conv2d(ParamStore& store, const std::string& prefix, int cin, int cout, int k, Rng& rng);
Var conv2d(Tape& t, const BoundParams& p, const std::string& prefix, Var x, int cin, int h, int w,
           int k, int stride, int pad);

// Channel norms for Cin x T (or Cin x pixels) layouts. Instance norm always
// normalizes over the current sequence; batch norm keeps running statistics
// in non-trainable store entries "<prefix>.running_mean/var" and uses them
// when training == false.
void init_instance_norm(ParamStore& store, const std::string& prefix, int channels);
Var instance_norm(Tape& t, const BoundParams& p, const std::string& prefix, Var x,
                  double eps = 1e-5);

void init_batch_norm(ParamStore& store, const std::string& prefix, int channels);
Var batch_norm(Tape& t, const BoundParams& p, const std::string& prefix, Var x, bool training,
               ParamStore* store /* for running-stat updates; may be null when !training */,
               double momentum = 0.1, double eps = 1e-5);

// L2-normalizes each row; rows with tiny norm are left near zero via eps.
Var l2_normalize_rows(Tape& t, Var x, double eps = 1e-12);

}  // namespace facetalk::nn
