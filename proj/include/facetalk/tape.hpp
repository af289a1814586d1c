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

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace facetalk::nn {

using Mat = Eigen::MatrixXd;

struct Var {
  int i = -1;
  bool valid() const { return i >= 0; }
};

// Reverse-mode autodiff tape over Eigen double matrices. One tape per
// forward pass; ops append nodes, backward() walks them in reverse.
// All shapes are (rows x cols); convolutions treat matrices as
// channels x spatial with explicit geometry arguments.
class Tape {
 public:
  Var constant(Mat v) { return push(std::move(v), false); }
  Var leaf(Mat v) { return push(std::move(v), true); }
  Var zeros(int rows, int cols) { return constant(Mat::Zero(rows, cols)); }

  const Mat& val(Var v) const { return nodes_[v.i].value; }
  const Mat& grad(Var v) const { return nodes_[v.i].grad; }
  double scalar(Var v) const { return nodes_[v.i].value(0, 0); }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  // gradient-tracked ancestor. `loss` must be 1x1.
  void backward(Var loss);

  // ---- arithmetic ----
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  // broadcast a row (1 x D) over all rows of a (N x D)
  Var add_row_broadcast(Var a, Var row);
  Var mul_row_broadcast(Var a, Var row);
  // broadcast a column (N x 1) over all columns of a (N x D)
  Var add_col_broadcast(Var a, Var col);
  Var mul_col_broadcast(Var a, Var col);
  // broadcast a 1x1 var over every entry of a
  Var add_broadcast_scalar(Var a, Var s);
  Var mul_broadcast_scalar(Var a, Var s);

  // ---- shape ----
  Var concat_rows(Var a, Var b);
  Var concat_cols(Var a, Var b);
  Var slice_rows(Var a, int from, int n);
  Var slice_cols(Var a, int from, int n);
  Var stack_rows(const std::vector<Var>& rows);  // each 1 x D -> N x D
  Var reshape(Var a, int rows, int cols);        // column-major relayout

  // ---- reductions ----
  Var sum(Var a);       // 1x1
  Var mean(Var a);      // 1x1
  Var row_sum(Var a);   // N x 1
  Var row_mean(Var a);  // N x 1
  Var col_sum(Var a);   // 1 x D

  // ---- elementwise nonlinearities ----
  Var sigmoid(Var a);
  Var tanh_(Var a);
  Var relu(Var a);
  Var leaky_relu(Var a, double alpha = 0.01);
  Var softplus(Var a);
  Var exp_(Var a);
  Var log_(Var a);  // input must be > 0
  Var abs_(Var a);
  Var square(Var a);
  Var sqrt_(Var a);        // input must be > 0
  Var reciprocal(Var a);   // input must be != 0

  Var row_softmax(Var a);

  // Gathers rows of `table` at `ids`; backward scatter-adds.
  Var gather_rows(Var table, std::vector<int> ids);

  // Same-padded 1-D convolution. x: Cin x T, w: Cout x (K*Cin), b: Cout x 1.
  Var conv1d_same(Var x, Var w, Var b, int k);

  // 2-D convolution. x: Cin x (H*W) row-major spatial, w: Cout x (K*K*Cin),
  // b: Cout x 1. Output: Cout x (Ho*Wo).
  Var conv2d(Var x, Var w, Var b, int cin, int h, int wdt, int k, int stride, int pad);

  // Nearest-neighbour 2x upsample. x: C x (H*W) -> C x (2H*2W).
  Var upsample2x(Var x, int c, int h, int wdt);

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> back;
    bool requires_grad = false;
  };

  Var push(Mat v, bool requires_grad) {
    nodes_.push_back(Node{std::move(v), Mat(), nullptr, requires_grad});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }
  Var push_op(Mat v, bool requires_grad, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(v), Mat(), std::move(back), requires_grad});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }
  bool rg(Var v) const { return nodes_[v.i].requires_grad; }
  Mat& g(int i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }
  const Mat& v(int i) const { return nodes_[i].value; }

  std::vector<Node> nodes_;
};

// im2col helpers shared by conv ops and their backward passes.
void im2col_1d(const Mat& x, int k, Mat& col);
void im2col_2d(const Mat& x, int cin, int h, int w, int k, int stride, int pad, Mat& col);
void col2im_2d(const Mat& col, int cin, int h, int w, int k, int stride, int pad, Mat& dx);

}  // namespace facetalk::nn
