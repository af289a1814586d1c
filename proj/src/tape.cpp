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

#include "facetalk/tape.hpp"

#include <cmath>
#include <memory>

#include "facetalk/error.hpp"

namespace facetalk::nn {

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}

double stable_softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void Tape::backward(Var loss) {
  if (v(loss.i).rows() != 1 || v(loss.i).cols() != 1) {
    throw ShapeMismatch("backward requires a 1x1 loss");
  }
  g(loss.i).setConstant(1.0);
  for (int i = loss.i; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.back || n.grad.size() == 0) continue;
    n.back(*this);
  }
}

Var Tape::add(Var a, Var b) {
  check_same_shape(v(a.i), v(b.i), "add");
  bool req = rg(a) || rg(b);
  int ai = a.i, bi = b.i;
  Var out = push_op(v(a.i) + v(b.i), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, bi, oi](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai) += t.g(oi);
      if (t.rg(Var{bi})) t.g(bi) += t.g(oi);
    };
  }
  return out;
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(v(a.i), v(b.i), "sub");
  bool req = rg(a) || rg(b);
  int ai = a.i, bi = b.i;
  Var out = push_op(v(a.i) - v(b.i), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, bi, oi](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai) += t.g(oi);
      if (t.rg(Var{bi})) t.g(bi) -= t.g(oi);
    };
  }
  return out;
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(v(a.i), v(b.i), "mul");
  bool req = rg(a) || rg(b);
  int ai = a.i, bi = b.i;
  Var out = push_op(v(a.i).cwiseProduct(v(b.i)), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, bi, oi](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai) += t.g(oi).cwiseProduct(t.v(bi));
      if (t.rg(Var{bi})) t.g(bi) += t.g(oi).cwiseProduct(t.v(ai));
    };
  }
  return out;
}

Var Tape::scale(Var a, double c) {
  int ai = a.i;
  Var out = push_op(v(a.i) * c, rg(a), nullptr);
  int oi = out.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi, c](Tape& t) { t.g(ai) += t.g(oi) * c; };
  }
  return out;
}

Var Tape::add_scalar(Var a, double c) {
  int ai = a.i;
  Var out = push_op((v(a.i).array() + c).matrix(), rg(a), nullptr);
  int oi = out.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi](Tape& t) { t.g(ai) += t.g(oi); };
  }
  return out;
}

Var Tape::matmul(Var a, Var b) {
  if (v(a.i).cols() != v(b.i).rows()) {
    throw ShapeMismatch("matmul: inner dims " + std::to_string(v(a.i).cols()) + " vs " +
                        std::to_string(v(b.i).rows()));
  }
  bool req = rg(a) || rg(b);
  int ai = a.i, bi = b.i;
  Var out = push_op(v(a.i) * v(b.i), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, bi, oi](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai).noalias() += t.g(oi) * t.v(bi).transpose();
      if (t.rg(Var{bi})) t.g(bi).noalias() += t.v(ai).transpose() * t.g(oi);
    };
  }
  return out;
}

Var Tape::transpose(Var a) {
  int ai = a.i;
  Var out = push_op(v(a.i).transpose(), rg(a), nullptr);
  int oi = out.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi](Tape& t) { t.g(ai) += t.g(oi).transpose(); };
  }
  return out;
}

Var Tape::add_row_broadcast(Var a, Var row) {
  if (v(row.i).rows() != 1 || v(row.i).cols() != v(a.i).cols()) {
    throw ShapeMismatch("add_row_broadcast: row must be 1 x cols(a)");
  }
  bool req = rg(a) || rg(row);
  int ai = a.i, ri = row.i;
  Var out = push_op(v(a.i).rowwise() + v(row.i).row(0), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, ri, oi](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai) += t.g(oi);
      if (t.rg(Var{ri})) t.g(ri) += t.g(oi).colwise().sum();
    };
  }
  return out;
}

Var Tape::mul_row_broadcast(Var a, Var row) {
  if (v(row.i).rows() != 1 || v(row.i).cols() != v(a.i).cols()) {
    throw ShapeMismatch("mul_row_broadcast: row must be 1 x cols(a)");
  }
  bool req = rg(a) || rg(row);
  int ai = a.i, ri = row.i;
  Var out = push_op((v(a.i).array().rowwise() * v(row.i).row(0).array()).matrix(), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, ri, oi](Tape& t) {
      if (t.rg(Var{ai}))
        t.g(ai).array() += t.g(oi).array().rowwise() * t.v(ri).row(0).array();
      if (t.rg(Var{ri}))
        t.g(ri) += (t.g(oi).cwiseProduct(t.v(ai))).colwise().sum();
    };
  }
  return out;
}

Var Tape::add_col_broadcast(Var a, Var col) {
  if (v(col.i).cols() != 1 || v(col.i).rows() != v(a.i).rows()) {
    throw ShapeMismatch("add_col_broadcast: col must be rows(a) x 1");
  }
  bool req = rg(a) || rg(col);
  int ai = a.i, ci = col.i;
  Var out = push_op(v(a.i).colwise() + v(col.i).col(0), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, ci, oi](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai) += t.g(oi);
      if (t.rg(Var{ci})) t.g(ci) += t.g(oi).rowwise().sum();
    };
  }
  return out;
}

Var Tape::mul_col_broadcast(Var a, Var col) {
  if (v(col.i).cols() != 1 || v(col.i).rows() != v(a.i).rows()) {
    throw ShapeMismatch("mul_col_broadcast: col must be rows(a) x 1");
  }
  bool req = rg(a) || rg(col);
  int ai = a.i, ci = col.i;
  Var out = push_op((v(a.i).array().colwise() * v(col.i).col(0).array()).matrix(), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, ci, oi](Tape& t) {
      if (t.rg(Var{ai}))
        t.g(ai).array() += t.g(oi).array().colwise() * t.v(ci).col(0).array();
      if (t.rg(Var{ci}))
        t.g(ci) += (t.g(oi).cwiseProduct(t.v(ai))).rowwise().sum();
    };
  }
  return out;
}

Var Tape::add_broadcast_scalar(Var a, Var s) {
  if (v(s.i).size() != 1) throw ShapeMismatch("add_broadcast_scalar: s must be 1x1");
  bool req = rg(a) || rg(s);
  int ai = a.i, si = s.i;
  Var out = push_op((v(a.i).array() + v(s.i)(0, 0)).matrix(), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, si, oi](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai) += t.g(oi);
      if (t.rg(Var{si})) t.g(si)(0, 0) += t.g(oi).sum();
    };
  }
  return out;
}

Var Tape::mul_broadcast_scalar(Var a, Var s) {
  if (v(s.i).size() != 1) throw ShapeMismatch("mul_broadcast_scalar: s must be 1x1");
  bool req = rg(a) || rg(s);
  int ai = a.i, si = s.i;
  Var out = push_op(v(a.i) * v(s.i)(0, 0), req, nullptr);
  int oi = out.i;
  if (req) {
    nodes_[oi].back = [ai, si, oi](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai) += t.g(oi) * t.v(si)(0, 0);
      if (t.rg(Var{si})) t.g(si)(0, 0) += t.g(oi).cwiseProduct(t.v(ai)).sum();
    };
  }
  return out;
}

Var Tape::concat_rows(Var a, Var b) {
  if (v(a.i).cols() != v(b.i).cols()) throw ShapeMismatch("concat_rows: column mismatch");
  bool req = rg(a) || rg(b);
  int ai = a.i, bi = b.i;
  Mat out(v(a.i).rows() + v(b.i).rows(), v(a.i).cols());
  out << v(a.i), v(b.i);
  Var o = push_op(std::move(out), req, nullptr);
  int oi = o.i;
  if (req) {
    int ar = static_cast<int>(v(a.i).rows());
    nodes_[oi].back = [ai, bi, oi, ar](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai) += t.g(oi).topRows(ar);
      if (t.rg(Var{bi})) t.g(bi) += t.g(oi).bottomRows(t.v(bi).rows());
    };
  }
  return o;
}

Var Tape::concat_cols(Var a, Var b) {
  if (v(a.i).rows() != v(b.i).rows()) throw ShapeMismatch("concat_cols: row mismatch");
  bool req = rg(a) || rg(b);
  int ai = a.i, bi = b.i;
  Mat out(v(a.i).rows(), v(a.i).cols() + v(b.i).cols());
  out << v(a.i), v(b.i);
  Var o = push_op(std::move(out), req, nullptr);
  int oi = o.i;
  if (req) {
    int ac = static_cast<int>(v(a.i).cols());
    nodes_[oi].back = [ai, bi, oi, ac](Tape& t) {
      if (t.rg(Var{ai})) t.g(ai) += t.g(oi).leftCols(ac);
      if (t.rg(Var{bi})) t.g(bi) += t.g(oi).rightCols(t.v(bi).cols());
    };
  }
  return o;
}

Var Tape::slice_rows(Var a, int from, int n) {
  if (from < 0 || n < 0 || from + n > v(a.i).rows()) throw ShapeMismatch("slice_rows: out of range");
  int ai = a.i;
  Var out = push_op(v(a.i).middleRows(from, n), rg(a), nullptr);
  int oi = out.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi, from, n](Tape& t) { t.g(ai).middleRows(from, n) += t.g(oi); };
  }
  return out;
}

Var Tape::slice_cols(Var a, int from, int n) {
  if (from < 0 || n < 0 || from + n > v(a.i).cols()) throw ShapeMismatch("slice_cols: out of range");
  int ai = a.i;
  Var out = push_op(v(a.i).middleCols(from, n), rg(a), nullptr);
  int oi = out.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi, from, n](Tape& t) { t.g(ai).middleCols(from, n) += t.g(oi); };
  }
  return out;
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeMismatch("stack_rows: empty input");
  int cols = static_cast<int>(v(rows[0].i).cols());
  bool req = false;
  std::vector<int> parents;
  parents.reserve(rows.size());
  Mat out(static_cast<int>(rows.size()), cols);
  for (size_t r = 0; r < rows.size(); ++r) {
    const Mat& m = v(rows[r].i);
    if (m.rows() != 1 || m.cols() != cols) throw ShapeMismatch("stack_rows: rows must be 1 x D");
    out.row(static_cast<int>(r)) = m.row(0);
    parents.push_back(rows[r].i);
    req = req || rg(rows[r]);
  }
  Var o = push_op(std::move(out), req, nullptr);
  int oi = o.i;
  if (req) {
    nodes_[oi].back = [parents, oi](Tape& t) {
      for (size_t r = 0; r < parents.size(); ++r) {
        if (t.rg(Var{parents[r]})) t.g(parents[r]) += t.g(oi).row(static_cast<int>(r));
      }
    };
  }
  return o;
}

Var Tape::reshape(Var a, int rows, int cols) {
  if (rows * cols != v(a.i).size()) throw ShapeMismatch("reshape: size mismatch");
  int ai = a.i;
  Mat out = Eigen::Map<const Mat>(v(a.i).data(), rows, cols);
  Var o = push_op(std::move(out), rg(a), nullptr);
  int oi = o.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi](Tape& t) {
      t.g(ai) += Eigen::Map<const Mat>(t.g(oi).data(), t.v(ai).rows(), t.v(ai).cols());
    };
  }
  return o;
}

Var Tape::sum(Var a) {
  int ai = a.i;
  Mat out(1, 1);
  out(0, 0) = v(a.i).sum();
  Var o = push_op(std::move(out), rg(a), nullptr);
  int oi = o.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi](Tape& t) { t.g(ai).array() += t.g(oi)(0, 0); };
  }
  return o;
}

Var Tape::mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(v(a.i).size())); }

Var Tape::row_sum(Var a) {
  int ai = a.i;
  Var o = push_op(v(a.i).rowwise().sum(), rg(a), nullptr);
  int oi = o.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi](Tape& t) { t.g(ai).colwise() += t.g(oi).col(0); };
  }
  return o;
}

Var Tape::row_mean(Var a) { return scale(row_sum(a), 1.0 / static_cast<double>(v(a.i).cols())); }

Var Tape::col_sum(Var a) {
  int ai = a.i;
  Var o = push_op(v(a.i).colwise().sum(), rg(a), nullptr);
  int oi = o.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi](Tape& t) { t.g(ai).rowwise() += t.g(oi).row(0); };
  }
  return o;
}

#define FACETALK_UNARY_OP(name, fwd_expr, bwd_expr)                      \
  Var Tape::name(Var a) {                                                \
    int ai = a.i;                                                        \
    Mat y = v(a.i).unaryExpr([](double x) { return fwd_expr; });         \
    Var o = push_op(std::move(y), rg(a), nullptr);                       \
    int oi = o.i;                                                        \
    if (rg(Var{ai})) {                                                   \
      nodes_[oi].back = [ai, oi](Tape& t) {                              \
        const Mat& x = t.v(ai);                                          \
        const Mat& y = t.v(oi);                                          \
        (void)x;                                                         \
        (void)y;                                                         \
        t.g(ai).array() += t.g(oi).array() * (bwd_expr);                 \
      };                                                                 \
    }                                                                    \
    return o;                                                            \
  }

FACETALK_UNARY_OP(sigmoid, stable_sigmoid(x), y.array() * (1.0 - y.array()))
FACETALK_UNARY_OP(tanh_, std::tanh(x), 1.0 - y.array().square())
FACETALK_UNARY_OP(relu, x > 0.0 ? x : 0.0,
                  x.unaryExpr([](double q) { return q > 0.0 ? 1.0 : 0.0; }).array())
FACETALK_UNARY_OP(softplus, stable_softplus(x),
                  x.unaryExpr([](double q) { return stable_sigmoid(q); }).array())
FACETALK_UNARY_OP(exp_, std::exp(x), y.array())
FACETALK_UNARY_OP(log_, std::log(x), x.array().inverse())
FACETALK_UNARY_OP(abs_, std::abs(x),
                  x.unaryExpr([](double q) { return q > 0.0 ? 1.0 : (q < 0.0 ? -1.0 : 0.0); })
                      .array())
FACETALK_UNARY_OP(square, x* x, 2.0 * x.array())
FACETALK_UNARY_OP(sqrt_, std::sqrt(x), 0.5 * y.array().inverse())
FACETALK_UNARY_OP(reciprocal, 1.0 / x, -y.array().square())

#undef FACETALK_UNARY_OP

Var Tape::leaky_relu(Var a, double alpha) {
  int ai = a.i;
  Mat y = v(a.i).unaryExpr([alpha](double x) { return x > 0.0 ? x : alpha * x; });
  Var o = push_op(std::move(y), rg(a), nullptr);
  int oi = o.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi, alpha](Tape& t) {
      t.g(ai).array() +=
          t.g(oi).array() *
          t.v(ai).unaryExpr([alpha](double q) { return q > 0.0 ? 1.0 : alpha; }).array();
    };
  }
  return o;
}

Var Tape::row_softmax(Var a) {
  const Mat& x = v(a.i);
  Mat y(x.rows(), x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    double m = x.row(r).maxCoeff();
    Eigen::RowVectorXd e = (x.row(r).array() - m).exp().matrix();
    y.row(r) = e / e.sum();
  }
  int ai = a.i;
  Var o = push_op(std::move(y), rg(a), nullptr);
  int oi = o.i;
  if (rg(Var{ai})) {
    nodes_[oi].back = [ai, oi](Tape& t) {
      const Mat& y = t.v(oi);
      const Mat& dy = t.g(oi);
      for (int r = 0; r < y.rows(); ++r) {
        double dot = dy.row(r).dot(y.row(r));
        t.g(ai).row(r).array() += (dy.row(r).array() - dot) * y.row(r).array();
      }
    };
  }
  return o;
}

Var Tape::gather_rows(Var table, std::vector<int> ids) {
  const Mat& tab = v(table.i);
  Mat out(static_cast<int>(ids.size()), tab.cols());
  for (size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= tab.rows()) throw ShapeMismatch("gather_rows: id out of range");
    out.row(static_cast<int>(r)) = tab.row(ids[r]);
  }
  int ti = table.i;
  Var o = push_op(std::move(out), rg(table), nullptr);
  int oi = o.i;
  if (rg(Var{ti})) {
    nodes_[oi].back = [ti, oi, ids = std::move(ids)](Tape& t) {
      for (size_t r = 0; r < ids.size(); ++r) {
        t.g(ti).row(ids[r]) += t.g(oi).row(static_cast<int>(r));
      }
    };
  }
  return o;
}

void im2col_1d(const Mat& x, int k, Mat& col) {
  const int cin = static_cast<int>(x.rows());
  const int tt = static_cast<int>(x.cols());
  const int pad = (k - 1) / 2;  // even kernels pad one less on the left
  col.setZero(k * cin, tt);
  for (int dk = 0; dk < k; ++dk) {
    for (int t = 0; t < tt; ++t) {
      int src = t + dk - pad;
      if (src < 0 || src >= tt) continue;
      col.block(dk * cin, t, cin, 1) = x.col(src);
    }
  }
}

Var Tape::conv1d_same(Var x, Var w, Var b, int k) {
  if (k < 1) throw ShapeMismatch("conv1d_same: kernel must be >= 1");
  const Mat& xv = v(x.i);
  const int cin = static_cast<int>(xv.rows());
  if (v(w.i).cols() != k * cin) throw ShapeMismatch("conv1d_same: weight cols != k*cin");
  if (v(b.i).rows() != v(w.i).rows() || v(b.i).cols() != 1) {
    throw ShapeMismatch("conv1d_same: bias must be Cout x 1");
  }
  Mat col;
  im2col_1d(xv, k, col);
  Mat y = v(w.i) * col;
  y.colwise() += v(b.i).col(0);
  bool req = rg(x) || rg(w) || rg(b);
  int xi = x.i, wi = w.i, bi = b.i;
  Var o = push_op(std::move(y), req, nullptr);
  int oi = o.i;
  if (req) {
    nodes_[oi].back = [xi, wi, bi, oi, k](Tape& t) {
      const Mat& xv = t.v(xi);
      const int cin = static_cast<int>(xv.rows());
      const int tt = static_cast<int>(xv.cols());
      const int pad = (k - 1) / 2;
      Mat col;
      im2col_1d(xv, k, col);
      const Mat& dy = t.g(oi);
      if (t.rg(Var{wi})) t.g(wi).noalias() += dy * col.transpose();
      if (t.rg(Var{bi})) t.g(bi) += dy.rowwise().sum();
      if (t.rg(Var{xi})) {
        Mat dcol;
        dcol.noalias() = t.v(wi).transpose() * dy;
        Mat& dx = t.g(xi);
        for (int dk = 0; dk < k; ++dk) {
          for (int tc = 0; tc < tt; ++tc) {
            int src = tc + dk - pad;
            if (src < 0 || src >= tt) continue;
            dx.col(src) += dcol.block(dk * cin, tc, cin, 1);
          }
        }
      }
    };
  }
  return o;
}

void im2col_2d(const Mat& x, int cin, int h, int w, int k, int stride, int pad, Mat& col) {
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  col.setZero(k * k * cin, ho * wo);
  for (int ky = 0; ky < k; ++ky) {
    for (int kx = 0; kx < k; ++kx) {
      const int rowbase = (ky * k + kx) * cin;
      for (int oy = 0; oy < ho; ++oy) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= h) continue;
        if (stride == 1) {
          // contiguous span: input columns track output columns one-to-one
          const int ox0 = std::max(0, pad - kx);
          const int ox1 = std::min(wo - 1, w - 1 + pad - kx);
          if (ox1 < ox0) continue;
          col.block(rowbase, oy * wo + ox0, cin, ox1 - ox0 + 1) =
              x.block(0, iy * w + (ox0 + kx - pad), cin, ox1 - ox0 + 1);
        } else {
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= w) continue;
            col.block(rowbase, oy * wo + ox, cin, 1) = x.col(iy * w + ix);
          }
        }
      }
    }
  }
}

void col2im_2d(const Mat& col, int cin, int h, int w, int k, int stride, int pad, Mat& dx) {
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  for (int ky = 0; ky < k; ++ky) {
    for (int kx = 0; kx < k; ++kx) {
      const int rowbase = (ky * k + kx) * cin;
      for (int oy = 0; oy < ho; ++oy) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= h) continue;
        if (stride == 1) {
          const int ox0 = std::max(0, pad - kx);
          const int ox1 = std::min(wo - 1, w - 1 + pad - kx);
          if (ox1 < ox0) continue;
          dx.block(0, iy * w + (ox0 + kx - pad), cin, ox1 - ox0 + 1) +=
              col.block(rowbase, oy * wo + ox0, cin, ox1 - ox0 + 1);
        } else {
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= w) continue;
            dx.col(iy * w + ix) += col.block(rowbase, oy * wo + ox, cin, 1);
          }
        }
      }
    }
  }
}

Var Tape::conv2d(Var x, Var w, Var b, int cin, int h, int wdt, int k, int stride, int pad) {
  const Mat& xv = v(x.i);
  if (xv.rows() != cin || xv.cols() != h * wdt) throw ShapeMismatch("conv2d: bad input geometry");
  if (v(w.i).cols() != k * k * cin) throw ShapeMismatch("conv2d: weight cols != k*k*cin");
  if (v(b.i).rows() != v(w.i).rows() || v(b.i).cols() != 1) {
    throw ShapeMismatch("conv2d: bias must be Cout x 1");
  }
  bool req = rg(x) || rg(w) || rg(b);
  int xi = x.i, wi = w.i, bi = b.i;

  // 1x1 stride-1 convolution is a plain channel mix; skip im2col entirely
  if (k == 1 && stride == 1 && pad == 0) {
    Mat y;
    y.noalias() = v(w.i) * xv;
    y.colwise() += v(b.i).col(0);
    Var o = push_op(std::move(y), req, nullptr);
    int oi = o.i;
    if (req) {
      nodes_[oi].back = [xi, wi, bi, oi](Tape& t) {
        const Mat& dy = t.g(oi);
        if (t.rg(Var{wi})) t.g(wi).noalias() += dy * t.v(xi).transpose();
        if (t.rg(Var{bi})) t.g(bi) += dy.rowwise().sum();
        if (t.rg(Var{xi})) t.g(xi).noalias() += t.v(wi).transpose() * dy;
      };
    }
    return o;
  }

  auto col = std::make_shared<Mat>();
  im2col_2d(xv, cin, h, wdt, k, stride, pad, *col);
  Mat y = v(w.i) * (*col);
  y.colwise() += v(b.i).col(0);
  Var o = push_op(std::move(y), req, nullptr);
  int oi = o.i;
  if (req) {
    // the column buffer is cached for the backward pass; rebuilding it
    // costs more than the memory at these sizes
    nodes_[oi].back = [xi, wi, bi, oi, cin, h, wdt, k, stride, pad, col](Tape& t) {
      const Mat& dy = t.g(oi);
      if (t.rg(Var{wi})) t.g(wi).noalias() += dy * col->transpose();
      if (t.rg(Var{bi})) t.g(bi) += dy.rowwise().sum();
      if (t.rg(Var{xi})) {
        Mat dcol;
        dcol.noalias() = t.v(wi).transpose() * dy;
        col2im_2d(dcol, cin, h, wdt, k, stride, pad, t.g(xi));
      }
    };
  }
  return o;
}

Var Tape::upsample2x(Var x, int c, int h, int wdt) {
  const Mat& xv = v(x.i);
  if (xv.rows() != c || xv.cols() != h * wdt) throw ShapeMismatch("upsample2x: bad geometry");
  Mat y(c, 4 * h * wdt);
  const int w2 = 2 * wdt;
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < wdt; ++xx) {
      const auto src = xv.col(yy * wdt + xx);
      y.col((2 * yy) * w2 + 2 * xx) = src;
      y.col((2 * yy) * w2 + 2 * xx + 1) = src;
      y.col((2 * yy + 1) * w2 + 2 * xx) = src;
      y.col((2 * yy + 1) * w2 + 2 * xx + 1) = src;
    }
  }
  int xi = x.i;
  Var o = push_op(std::move(y), rg(x), nullptr);
  int oi = o.i;
  if (rg(Var{xi})) {
    nodes_[oi].back = [xi, oi, h, wdt](Tape& t) {
      const Mat& dy = t.g(oi);
      Mat& dx = t.g(xi);
      const int w2 = 2 * wdt;
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < wdt; ++xx) {
          dx.col(yy * wdt + xx) += dy.col((2 * yy) * w2 + 2 * xx) +
                                   dy.col((2 * yy) * w2 + 2 * xx + 1) +
                                   dy.col((2 * yy + 1) * w2 + 2 * xx) +
                                   dy.col((2 * yy + 1) * w2 + 2 * xx + 1);
        }
      }
    };
  }
  return o;
}

}  // namespace facetalk::nn
