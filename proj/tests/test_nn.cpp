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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "facetalk/layers.hpp"
#include "facetalk/params.hpp"
#include "facetalk/tape.hpp"
#include "gradcheck.hpp"

using namespace facetalk;
using namespace facetalk::nn;
using facetalk::testing::gradcheck;
using facetalk::testing::random_mat;

TEST_CASE("arithmetic and broadcast op gradients") {
  Rng rng(101);
  Mat a = random_mat(3, 4, rng);
  Mat b = random_mat(3, 4, rng);
  Mat row = random_mat(1, 4, rng);
  Mat col = random_mat(3, 1, rng);
  Mat s = random_mat(1, 1, rng);

  CHECK(gradcheck({a, b}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.mul(t.add(x[0], x[1]), t.sub(x[0], x[1])));
        }) < 1e-7);
  CHECK(gradcheck({a, row}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.add_row_broadcast(x[0], x[1])));
        }) < 1e-7);
  CHECK(gradcheck({a, row}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.mul_row_broadcast(x[0], x[1])));
        }) < 1e-7);
  CHECK(gradcheck({a, col}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.add_col_broadcast(x[0], x[1])));
        }) < 1e-7);
  CHECK(gradcheck({a, col}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.mul_col_broadcast(x[0], x[1])));
        }) < 1e-7);
  CHECK(gradcheck({a, s}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.add_broadcast_scalar(x[0], x[1])));
        }) < 1e-7);
  CHECK(gradcheck({a, s}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.mul_broadcast_scalar(x[0], x[1])));
        }) < 1e-7);
}

TEST_CASE("matmul, transpose, reshape, slicing gradients") {
  Rng rng(102);
  Mat a = random_mat(3, 5, rng);
  Mat b = random_mat(5, 2, rng);

  CHECK(gradcheck({a, b}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.matmul(x[0], x[1])));
        }) < 1e-7);
  CHECK(gradcheck({a}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.transpose(x[0])));
        }) < 1e-7);
  CHECK(gradcheck({a}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.reshape(x[0], 5, 3)));
        }) < 1e-7);
  CHECK(gradcheck({a}, [](Tape& t, const std::vector<Var>& x) {
          Var top = t.slice_rows(x[0], 0, 2);
          Var rest = t.slice_rows(x[0], 1, 2);
          return t.sum(t.mul(top, rest));
        }) < 1e-7);
  Mat c = random_mat(3, 2, rng);
  CHECK(gradcheck({a, c}, [](Tape& t, const std::vector<Var>& x) {
          Var cat = t.concat_cols(x[0], x[1]);
          return t.sum(t.square(t.slice_cols(cat, 3, 4)));
        }) < 1e-7);
  CHECK(gradcheck({a}, [](Tape& t, const std::vector<Var>& x) {
          std::vector<Var> rows;
          for (int r = 0; r < 3; ++r) rows.push_back(t.slice_rows(x[0], r, 1));
          std::swap(rows[0], rows[2]);
          return t.sum(t.square(t.stack_rows(rows)));
        }) < 1e-7);
}

TEST_CASE("nonlinearity gradients") {
  Rng rng(103);
  Mat a = random_mat(4, 3, rng);
  Mat pos = random_mat(4, 3, rng).cwiseAbs() + Mat::Constant(4, 3, 0.5);

  auto check = [](const Mat& m, auto op) {
    return gradcheck({m}, [op](Tape& t, const std::vector<Var>& x) {
      return t.sum(t.square(op(t, x[0])));
    });
  };
  CHECK(check(a, [](Tape& t, Var v) { return t.sigmoid(v); }) < 1e-7);
  CHECK(check(a, [](Tape& t, Var v) { return t.tanh_(v); }) < 1e-7);
  CHECK(check(a, [](Tape& t, Var v) { return t.softplus(v); }) < 1e-7);
  CHECK(check(a, [](Tape& t, Var v) { return t.exp_(v); }) < 1e-7);
  CHECK(check(pos, [](Tape& t, Var v) { return t.log_(v); }) < 1e-7);
  CHECK(check(pos, [](Tape& t, Var v) { return t.sqrt_(v); }) < 1e-7);
  CHECK(check(pos, [](Tape& t, Var v) { return t.reciprocal(v); }) < 1e-7);
  CHECK(check(pos, [](Tape& t, Var v) { return t.abs_(v); }) < 1e-6);
  // relu/leaky at points away from the kink
  CHECK(check(pos, [](Tape& t, Var v) { return t.relu(v); }) < 1e-7);
  CHECK(check(pos, [](Tape& t, Var v) { return t.leaky_relu(v, 0.1); }) < 1e-7);
}

TEST_CASE("softmax rows sum to one and gradients match") {
  Rng rng(104);
  Mat a = random_mat(3, 6, rng);
  Tape t;
  Var y = t.row_softmax(t.constant(a));
  for (int r = 0; r < 3; ++r) {
    CHECK(t.val(y).row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.val(y).row(r).minCoeff() > 0.0);
  }
  Mat w = random_mat(3, 6, rng);
  CHECK(gradcheck({a}, [&w](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.mul(t.row_softmax(x[0]), t.constant(w)));
        }) < 1e-7);
}

TEST_CASE("gather_rows gradients") {
  Rng rng(105);
  Mat table = random_mat(7, 4, rng);
  CHECK(gradcheck({table}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.gather_rows(x[0], {1, 3, 3, 0})));
        }) < 1e-7);
}

TEST_CASE("conv1d_same values and gradients") {
  Rng rng(106);
  // Identity kernel (center tap) must reproduce the input.
  Tape t;
  Mat x = random_mat(2, 5, rng);
  Mat w = Mat::Zero(2, 3 * 2);  // k=3, cin=2, cout=2
  w(0, 1 * 2 + 0) = 1.0;        // center tap, channel 0 -> out 0
  w(1, 1 * 2 + 1) = 1.0;
  Mat b = Mat::Zero(2, 1);
  Var y = t.conv1d_same(t.constant(x), t.constant(w), t.constant(b), 3);
  CHECK((t.val(y) - x).cwiseAbs().maxCoeff() < 1e-12);

  Mat xr = random_mat(3, 6, rng);
  Mat wr = random_mat(4, 3 * 3, rng, 0.5);
  Mat br = random_mat(4, 1, rng, 0.1);
  CHECK(gradcheck({xr, wr, br}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.conv1d_same(x[0], x[1], x[2], 3)));
        }) < 1e-7);

  // even kernels pad asymmetrically but still preserve length
  for (int k : {1, 2, 4}) {
    Mat wk = random_mat(4, k * 3, rng, 0.5);
    Tape tk;
    Var yk = tk.conv1d_same(tk.constant(xr), tk.constant(wk), tk.constant(br), k);
    CHECK(tk.val(yk).cols() == 6);
    CHECK(gradcheck({xr, wk, br}, [k](Tape& t, const std::vector<Var>& x) {
            return t.sum(t.square(t.conv1d_same(x[0], x[1], x[2], k)));
          }) < 1e-7);
  }
}

TEST_CASE("conv2d values and gradients") {
  Rng rng(107);
  // 1x1 kernel stride 1: per-pixel linear map.
  Tape t;
  Mat x = random_mat(2, 4 * 4, rng);
  Mat w = random_mat(3, 2, rng);
  Mat b = random_mat(3, 1, rng);
  Var y = t.conv2d(t.constant(x), t.constant(w), t.constant(b), 2, 4, 4, 1, 1, 0);
  Mat expect = w * x;
  expect.colwise() += b.col(0);
  CHECK((t.val(y) - expect).cwiseAbs().maxCoeff() < 1e-12);

  Mat xr = random_mat(2, 5 * 4, rng);
  Mat wr = random_mat(3, 3 * 3 * 2, rng, 0.5);
  Mat br = random_mat(3, 1, rng, 0.1);
  CHECK(gradcheck({xr, wr, br}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.conv2d(x[0], x[1], x[2], 2, 5, 4, 3, 1, 1)));
        }) < 1e-7);
  // strided
  CHECK(gradcheck({xr, wr, br}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.conv2d(x[0], x[1], x[2], 2, 5, 4, 3, 2, 1)));
        }) < 1e-7);
}

TEST_CASE("upsample2x geometry and gradient") {
  Rng rng(108);
  Tape t;
  Mat x = random_mat(1, 2 * 2, rng);
  Var y = t.upsample2x(t.constant(x), 1, 2, 2);
  CHECK(t.val(y).cols() == 16);
  CHECK(t.val(y)(0, 0) == x(0, 0));
  CHECK(t.val(y)(0, 1) == x(0, 0));
  CHECK(t.val(y)(0, 4) == x(0, 0));  // row below
  CHECK(t.val(y)(0, 2) == x(0, 1));

  Mat xr = random_mat(2, 3 * 2, rng);
  CHECK(gradcheck({xr}, [](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.square(t.upsample2x(x[0], 2, 3, 2)));
        }) < 1e-7);
}

TEST_CASE("layer composition gradients: linear + layer_norm + lstm") {
  Rng rng(109);
  ParamStore store;
  init_linear(store, "fc", 4, 3, rng);
  init_layer_norm(store, "ln", 3);
  init_lstm(store, "rnn", 3, 5, rng);

  Mat x = random_mat(6, 4, rng);
  std::vector<Mat> inputs = {x};
  std::vector<std::string> names;
  for (const auto& [name, e] : store.entries()) {
    inputs.push_back(e.value);
    names.push_back(name);
  }
  auto loss_fn = [&names](Tape& t, const std::vector<Var>& xs) {
    BoundParams p;
    for (size_t k = 0; k < names.size(); ++k) p.vars[names[k]] = xs[k + 1];
    Var h = layer_norm(t, p, "ln", linear(t, p, "fc", xs[0]));
    Var out = lstm_seq(t, p, "rnn", h, 5);
    return t.sum(t.square(out));
  };
  CHECK(gradcheck(inputs, loss_fn, 1e-5) < 1e-6);
}

TEST_CASE("bilstm output width and determinism") {
  Rng rng(110);
  ParamStore store;
  init_bilstm(store, "b", 3, 4, rng);
  Mat x = random_mat(5, 3, rng);
  Tape t1, t2;
  BoundParams p1 = bind_params(t1, store);
  BoundParams p2 = bind_params(t2, store);
  Var y1 = bilstm_seq(t1, p1, "b", t1.constant(x), 4);
  Var y2 = bilstm_seq(t2, p2, "b", t2.constant(x), 4);
  CHECK(t1.val(y1).rows() == 5);
  CHECK(t1.val(y1).cols() == 8);
  CHECK((t1.val(y1) - t2.val(y2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("instance and batch norm behaviour") {
  Rng rng(111);
  ParamStore store;
  init_instance_norm(store, "in", 3);
  init_batch_norm(store, "bn", 3);

  Mat x = random_mat(3, 10, rng, 2.0);
  Tape t;
  BoundParams p = bind_params(t, store);
  Var yi = instance_norm(t, p, "in", t.constant(x));
  // each channel normalized to ~zero mean, unit variance
  for (int c = 0; c < 3; ++c) {
    CHECK(t.val(yi).row(c).mean() == doctest::Approx(0.0).epsilon(1e-9));
  }

  Var yb = batch_norm(t, p, "bn", t.constant(x), /*training=*/true, &store);
  CHECK(t.val(yb).rows() == 3);
  // running stats moved toward batch stats
  CHECK(store.value("bn.running_mean").cwiseAbs().sum() > 0.0);

  // inference path uses running stats and is deterministic
  Tape t3;
  BoundParams p3 = bind_params(t3, store);
  Var ye = batch_norm(t3, p3, "bn", t3.constant(x), /*training=*/false, nullptr);
  CHECK(t3.val(ye).rows() == 3);

  // gradients through the norm at a non-degenerate affine point
  Mat g = random_mat(2, 1, rng);
  Mat be = random_mat(2, 1, rng);
  Mat xs = random_mat(2, 6, rng);
  CHECK(gradcheck({xs, g, be}, [](Tape& t, const std::vector<Var>& x) {
          BoundParams p;
          p.vars["in.gamma"] = x[1];
          p.vars["in.beta"] = x[2];
          return t.sum(t.square(instance_norm(t, p, "in", x[0])));
        }) < 1e-4);
}

TEST_CASE("l2_normalize_rows yields unit rows with correct gradient") {
  Rng rng(112);
  Mat x = random_mat(4, 6, rng);
  Tape t;
  Var y = l2_normalize_rows(t, t.constant(x));
  for (int r = 0; r < 4; ++r) CHECK(t.val(y).row(r).norm() == doctest::Approx(1.0).epsilon(1e-9));
  Mat w = random_mat(4, 6, rng);
  CHECK(gradcheck({x}, [&w](Tape& t, const std::vector<Var>& x) {
          return t.sum(t.mul(l2_normalize_rows(t, x[0]), t.constant(w)));
        }) < 1e-6);
}

TEST_CASE("adam decreases a quadratic") {
  Rng rng(113);
  ParamStore store;
  store.create_gaussian("x", 3, 3, 1.0, rng);
  Mat target = random_mat(3, 3, rng);
  double first = -1.0;
  double last = -1.0;
  for (int step = 1; step <= 200; ++step) {
    Tape t;
    BoundParams p = bind_params(t, store);
    Var diff = t.sub(p["x"], t.constant(target));
    Var loss = t.sum(t.square(diff));
    t.backward(loss);
    if (step == 1) first = t.scalar(loss);
    last = t.scalar(loss);
    store.adam_step(collect_grads(t, store, p), 0.05, step);
  }
  CHECK(last < 0.01 * first);
}

TEST_CASE("param store serialization round-trips bit-exactly") {
  Rng rng(114);
  ParamStore store;
  store.create_xavier("a.w", 3, 4, rng);
  store.create("a.stat", 2, 2, /*trainable=*/false).setConstant(0.25);
  store.value("a.w")(1, 2) = 1.5;
  store.entry("a.w").m.setConstant(0.125);

  Checkpoint ck;
  ck.stage = "unit";
  ck.step = 42;
  ck.config_hash = 0xabcdef12345ULL;
  ck.params = store;
  ck.extra = {{"note", 1}};
  ck.save("ckpt_test.blob");

  Checkpoint lk = Checkpoint::load("ckpt_test.blob");
  CHECK(lk.stage == "unit");
  CHECK(lk.step == 42);
  CHECK(lk.config_hash == 0xabcdef12345ULL);
  CHECK(lk.params.entry("a.stat").trainable == false);
  CHECK((lk.params.value("a.w") - store.value("a.w")).cwiseAbs().maxCoeff() == 0.0);
  CHECK((lk.params.entry("a.w").m - store.entry("a.w").m).cwiseAbs().maxCoeff() == 0.0);
  std::remove("ckpt_test.blob");
}
