/* Copyright 2026 The MAFT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "maft/autograd.hpp"
#include "maft/error.hpp"
#include "maft/flops.hpp"

namespace maft {

void Gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  RecordMacs(static_cast<std::uint64_t>(m) * k * n);
}

namespace ops {
namespace {

Tensor TransposeOf(const Tensor& x) {
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  Tensor out({c, r}, x.dtype());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  }
  return out;
}

void RequireMatrix(const Tensor& t, const char* what) {
  Check(t.rank() == 2, ErrorCode::kDimension,
        std::string(what) + " expects a matrix, got shape " +
            ShapeString(t.shape()));
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* what) {
  Check(a.shape() == b.shape(), ErrorCode::kDimension,
        std::string(what) + ": shape mismatch " + ShapeString(a.shape()) +
            " vs " + ShapeString(b.shape()));
}

Tape& TapeOf(Var v) {
  Check(v.valid(), ErrorCode::kInvalidArgument, "invalid variable");
  return *v.tape();
}

// Copies columns [begin, begin+count) of x into a [rows, count] tensor.
Tensor ColumnBlock(const Tensor& x, std::size_t begin, std::size_t count) {
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  Tensor out({r, count});
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(x.data() + i * c + begin, count, out.data() + i * count);
  }
  return out;
}

// Like ColumnBlock, but returns the transpose [count, rows].
Tensor ColumnBlockTransposed(const Tensor& x, std::size_t begin,
                             std::size_t count) {
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  Tensor out({count, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t t = 0; t < count; ++t) {
      out[t * r + i] = x[i * c + begin + t];
    }
  }
  return out;
}

// Row-wise softmax in place; fails on a row with no finite entry.
void SoftmaxInPlace(double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = x + i * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, row[j]);
    Check(mx > -std::numeric_limits<double>::infinity(), ErrorCode::kNumeric,
          "softmax row " + std::to_string(i) + " is entirely -inf");
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < cols; ++j) row[j] *= inv;
  }
}

// dx = y * (dy - rowsum(dy * y))
Tensor SoftmaxBackward(const Tensor& y, const Tensor& dy, std::size_t rows,
                       std::size_t cols) {
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    const double* yr = y.data() + i * cols;
    const double* gr = dy.data() + i * cols;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += yr[j] * gr[j];
    double* out = dx.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] = yr[j] * (gr[j] - dot);
  }
  return dx;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var MatMul(Var a, Var b) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireMatrix(av, "matmul");
  RequireMatrix(bv, "matmul");
  Check(av.cols() == bv.rows(), ErrorCode::kDimension,
        "matmul inner extents differ: " + ShapeString(av.shape()) + " x " +
            ShapeString(bv.shape()));
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n}, tape.dtype());
  Gemm(av.data(), bv.data(), out.data(), m, k, n);
  return tape.Record(std::move(out), {a, b},
                     [a, b, m, k, n](Tape& t, const Tensor& g) {
                       const Tensor& av = a.value();
                       const Tensor& bv = b.value();
                       if (t.requires_grad(a)) {
                         Tensor da({m, k});
                         Tensor bt = TransposeOf(bv);
                         Gemm(g.data(), bt.data(), da.data(), m, n, k);
                         t.Accumulate(a, da);
                       }
                       if (t.requires_grad(b)) {
                         Tensor db({k, n});
                         Tensor at = TransposeOf(av);
                         Gemm(at.data(), g.data(), db.data(), k, m, n);
                         t.Accumulate(b, db);
                       }
                     });
}

Var MatMulTransposed(Var a, Var b) {
  Tape& tape = TapeOf(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireMatrix(av, "matmul_transposed");
  RequireMatrix(bv, "matmul_transposed");
  Check(av.cols() == bv.cols(), ErrorCode::kDimension,
        "matmul_transposed inner extents differ: " + ShapeString(av.shape()) +
            " x " + ShapeString(bv.shape()) + "^T");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor bt = TransposeOf(bv);
  Tensor out({m, n}, tape.dtype());
  Gemm(av.data(), bt.data(), out.data(), m, k, n);
  return tape.Record(std::move(out), {a, b},
                     [a, b, m, k, n](Tape& t, const Tensor& g) {
                       if (t.requires_grad(a)) {
                         Tensor da({m, k});
                         Gemm(g.data(), b.value().data(), da.data(), m, n, k);
                         t.Accumulate(a, da);
                       }
                       if (t.requires_grad(b)) {
                         Tensor db({n, k});
                         Tensor gt = TransposeOf(g);
                         Gemm(gt.data(), a.value().data(), db.data(), n, m, k);
                         t.Accumulate(b, db);
                       }
                     });
}

Var Add(Var a, Var b) {
  Tape& tape = TapeOf(a);
  RequireSameShape(a.value(), b.value(), "add");
  Tensor out(a.value().shape(), tape.dtype());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] + b.value()[i];
  }
  return tape.Record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.Accumulate(a, g);
    t.Accumulate(b, g);
  });
}

Var Sub(Var a, Var b) {
  Tape& tape = TapeOf(a);
  RequireSameShape(a.value(), b.value(), "sub");
  Tensor out(a.value().shape(), tape.dtype());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] - b.value()[i];
  }
  return tape.Record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.Accumulate(a, g);
    t.AccumulateScaled(b, g, -1.0);
  });
}

Var Mul(Var a, Var b) {
  Tape& tape = TapeOf(a);
  RequireSameShape(a.value(), b.value(), "mul");
  Tensor out(a.value().shape(), tape.dtype());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.value()[i] * b.value()[i];
  }
  return tape.Record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    Tensor da(g.shape()), db(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i) {
      da[i] = g[i] * b.value()[i];
      db[i] = g[i] * a.value()[i];
    }
    t.Accumulate(a, da);
    t.Accumulate(b, db);
  });
}

Var AddBias(Var x, Var bias) {
  Tape& tape = TapeOf(x);
  const Tensor& xv = x.value();
  RequireMatrix(xv, "add_bias");
  const std::size_t r = xv.rows(), c = xv.cols();
  Check(bias.value().size() == c, ErrorCode::kDimension,
        "add_bias: bias length " + std::to_string(bias.value().size()) +
            " vs " + std::to_string(c) + " columns");
  Tensor out(xv.shape(), tape.dtype());
  const double* bv = bias.value().data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + bv[j];
  }
  return tape.Record(std::move(out), {x, bias},
                     [x, bias, r, c](Tape& t, const Tensor& g) {
                       t.Accumulate(x, g);
                       if (t.requires_grad(bias)) {
                         Tensor db(bias.value().shape());
                         for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < c; ++j) {
                             db[j] += g[i * c + j];
                           }
                         }
                         t.Accumulate(bias, db);
                       }
                     });
}

Var Scale(Var x, double factor) {
  Tape& tape = TapeOf(x);
  Tensor out(x.value().shape(), tape.dtype());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * factor;
  return tape.Record(std::move(out), {x}, [x, factor](Tape& t,
                                                       const Tensor& g) {
    t.AccumulateScaled(x, g, factor);
  });
}

Var SoftmaxRows(Var x) {
  Tape& tape = TapeOf(x);
  const Tensor& xv = x.value();
  RequireMatrix(xv, "softmax_rows");
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out = xv;
  SoftmaxInPlace(out.data(), r, c);
  Tensor y = out;  // unquantized copy for the gradient
  out = out.AsType(tape.dtype());
  return tape.Record(std::move(out), {x},
                     [x, y = std::move(y), r, c](Tape& t, const Tensor& g) {
                       t.Accumulate(x, SoftmaxBackward(y, g, r, c));
                     });
}

Var LayerNorm(Var x, Var gain, Var bias, double eps) {
  Tape& tape = TapeOf(x);
  Check(eps > 0.0, ErrorCode::kInvalidArgument, "layer_norm eps must be > 0");
  const Tensor& xv = x.value();
  Check(xv.rank() >= 1, ErrorCode::kDimension, "layer_norm needs rank >= 1");
  const std::size_t d = xv.shape().back();
  const std::size_t rows = xv.size() / d;
  Check(gain.value().size() == d && bias.value().size() == d,
        ErrorCode::kDimension, "layer_norm affine length mismatch");
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(rows);
  Tensor out(xv.shape(), tape.dtype());
  const double* gv = gain.value().data();
  const double* bv = bias.value().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xr = xv.data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[i] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mean) * inv;
      xhat[i * d + j] = h;
      out[i * d + j] = h * gv[j] + bv[j];
    }
  }
  return tape.Record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std),
       rows, d](Tape& t, const Tensor& g) {
        const double* gv = gain.value().data();
        Tensor dx(x.value().shape());
        Tensor dgain({d}), dbias({d});
        for (std::size_t i = 0; i < rows; ++i) {
          const double* gr = g.data() + i * d;
          const double* hr = xhat.data() + i * d;
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = gr[j] * gv[j];
            mean_dh += dh;
            mean_dh_h += dh * hr[j];
            dgain[j] += gr[j] * hr[j];
            dbias[j] += gr[j];
          }
          mean_dh /= static_cast<double>(d);
          mean_dh_h /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j) {
            const double dh = gr[j] * gv[j];
            dx[i * d + j] = inv_std[i] * (dh - mean_dh - hr[j] * mean_dh_h);
          }
        }
        t.Accumulate(x, dx);
        t.Accumulate(gain, dgain);
        t.Accumulate(bias, dbias);
      });
}

// tanh approximation:
// 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
Var Gelu(Var x) {
  Tape& tape = TapeOf(x);
  const Tensor& xv = x.value();
  Tensor out(xv.shape(), tape.dtype());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  return tape.Record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    const Tensor& xv = x.value();
    Tensor dx(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double dinner = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      dx[i] = g[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * dinner);
    }
    t.Accumulate(x, dx);
  });
}

Var Sum(Var x) {
  Tape& tape = TapeOf(x);
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return tape.Record(Tensor::Scalar(total, tape.dtype()), {x},
                     [x](Tape& t, const Tensor& g) {
                       t.Accumulate(x, Tensor::Full(x.value().shape(), g[0]));
                     });
}

Var Mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return Scale(Sum(x), 1.0 / n);
}

Var Rows(Var x, std::size_t begin, std::size_t count) {
  Tape& tape = TapeOf(x);
  const Tensor& xv = x.value();
  RequireMatrix(xv, "rows");
  Check(count > 0 && begin + count <= xv.rows(), ErrorCode::kDimension,
        "row range out of bounds");
  const std::size_t c = xv.cols();
  Tensor out({count, c}, tape.dtype());
  std::copy_n(xv.data() + begin * c, count * c, out.data());
  return tape.Record(std::move(out), {x},
                     [x, begin, count, c](Tape& t, const Tensor& g) {
                       Tensor dx(x.value().shape());
                       std::copy_n(g.data(), count * c, dx.data() + begin * c);
                       t.Accumulate(x, dx);
                     });
}

Var Cols(Var x, std::size_t begin, std::size_t count) {
  Tape& tape = TapeOf(x);
  const Tensor& xv = x.value();
  RequireMatrix(xv, "cols");
  Check(count > 0 && begin + count <= xv.cols(), ErrorCode::kDimension,
        "column range out of bounds");
  Tensor out = ColumnBlock(xv, begin, count).AsType(tape.dtype());
  return tape.Record(std::move(out), {x},
                     [x, begin, count](Tape& t, const Tensor& g) {
                       const std::size_t r = x.value().rows();
                       const std::size_t c = x.value().cols();
                       Tensor dx(x.value().shape());
                       for (std::size_t i = 0; i < r; ++i) {
                         std::copy_n(g.data() + i * count, count,
                                     dx.data() + i * c + begin);
                       }
                       t.Accumulate(x, dx);
                     });
}

Var ConcatRows(std::span<const Var> parts) {
  Check(!parts.empty(), ErrorCode::kInvalidArgument, "concat of nothing");
  Tape& tape = TapeOf(parts[0]);
  const std::size_t c = parts[0].value().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    RequireMatrix(p.value(), "concat_rows");
    Check(p.value().cols() == c, ErrorCode::kDimension,
          "concat_rows column mismatch");
    total += p.value().rows();
  }
  Tensor out({total, c}, tape.dtype());
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + offset);
    offset += p.value().size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.Record(std::move(out), parts,
                     [inputs](Tape& t, const Tensor& g) {
                       std::size_t offset = 0;
                       for (const Var& p : inputs) {
                         const std::size_t n = p.value().size();
                         if (t.requires_grad(p)) {
                           Tensor dp(p.value().shape());
                           std::copy_n(g.data() + offset, n, dp.data());
                           t.Accumulate(p, dp);
                         }
                         offset += n;
                       }
                     });
}

Var RepeatRows(Var row, std::size_t times) {
  Tape& tape = TapeOf(row);
  const Tensor& rv = row.value();
  RequireMatrix(rv, "repeat_rows");
  Check(rv.rows() == 1 && times > 0, ErrorCode::kDimension,
        "repeat_rows needs a single row and times > 0");
  const std::size_t c = rv.cols();
  Tensor out({times, c}, tape.dtype());
  for (std::size_t i = 0; i < times; ++i) {
    std::copy_n(rv.data(), c, out.data() + i * c);
  }
  return tape.Record(std::move(out), {row},
                     [row, times, c](Tape& t, const Tensor& g) {
                       Tensor dr({1, c});
                       for (std::size_t i = 0; i < times; ++i) {
                         for (std::size_t j = 0; j < c; ++j) {
                           dr[j] += g[i * c + j];
                         }
                       }
                       t.Accumulate(row, dr);
                     });
}

Var Transpose(Var x) {
  Tape& tape = TapeOf(x);
  RequireMatrix(x.value(), "transpose");
  return tape.Record(TransposeOf(x.value()), {x},
                     [x](Tape& t, const Tensor& g) {
                       t.Accumulate(x, TransposeOf(g));
                     });
}

Var GatherColumns(Var x, std::span<const std::size_t> columns) {
  Tape& tape = TapeOf(x);
  const Tensor& xv = x.value();
  RequireMatrix(xv, "gather_columns");
  Check(!columns.empty(), ErrorCode::kInvalidArgument,
        "gather_columns needs at least one column");
  const std::size_t r = xv.rows(), c = xv.cols(), k = columns.size();
  for (std::size_t col : columns) {
    Check(col < c, ErrorCode::kInvalidArgument,
          "column index " + std::to_string(col) + " out of range for " +
              std::to_string(c) + " columns");
  }
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  Tensor out({r, k}, tape.dtype());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = xv[i * c + cols[j]];
  }
  return tape.Record(std::move(out), {x},
                     [x, cols = std::move(cols), r, c](Tape& t,
                                                       const Tensor& g) {
                       const std::size_t k = cols.size();
                       Tensor dx(x.value().shape());
                       for (std::size_t i = 0; i < r; ++i) {
                         for (std::size_t j = 0; j < k; ++j) {
                           dx[i * c + cols[j]] += g[i * k + j];
                         }
                       }
                       t.Accumulate(x, dx);
                     });
}

Var L2NormalizeRows(Var x) {
  Tape& tape = TapeOf(x);
  const Tensor& xv = x.value();
  RequireMatrix(xv, "l2_normalize_rows");
  const std::size_t r = xv.rows(), c = xv.cols();
  std::vector<double> norms(r);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < c; ++j) ss += xv[i * c + j] * xv[i * c + j];
    norms[i] = std::max(std::sqrt(ss), 1e-12);
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = xv[i * c + j] / norms[i];
  }
  Tensor out = y.AsType(tape.dtype());
  return tape.Record(
      std::move(out), {x},
      [x, y = std::move(y), norms = std::move(norms), r, c](Tape& t,
                                                            const Tensor& g) {
        Tensor dx(x.value().shape());
        for (std::size_t i = 0; i < r; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += y[i * c + j] * g[i * c + j];
          for (std::size_t j = 0; j < c; ++j) {
            dx[i * c + j] = (g[i * c + j] - y[i * c + j] * dot) / norms[i];
          }
        }
        t.Accumulate(x, dx);
      });
}

Var CrossEntropy(Var logits, std::span<const std::size_t> targets,
                 double smoothing) {
  Tape& tape = TapeOf(logits);
  const Tensor& lv = logits.value();
  RequireMatrix(lv, "cross_entropy");
  const std::size_t r = lv.rows(), c = lv.cols();
  Check(targets.size() == r, ErrorCode::kDimension,
        "cross_entropy: one target per row required");
  Check(smoothing >= 0.0 && smoothing < 1.0, ErrorCode::kInvalidArgument,
        "label smoothing must be in [0,1)");
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  Tensor prob = lv;
  SoftmaxInPlace(prob.data(), r, c);
  // Target distribution (1 - s) * onehot + s / c.
  const double off = smoothing / static_cast<double>(c);
  const double on = 1.0 - smoothing + off;
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    Check(tg[i] < c, ErrorCode::kInvalidArgument, "target out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, lv[i * c + j]);
    double total = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      total += std::exp(lv[i * c + j] - mx);
      weighted += (j == tg[i] ? on : off) * lv[i * c + j];
    }
    loss += mx + std::log(total) - weighted;
  }
  loss /= static_cast<double>(r);
  return tape.Record(
      Tensor::Scalar(loss, tape.dtype()), {logits},
      [logits, prob = std::move(prob), tg = std::move(tg), r, c, on, off](
          Tape& t, const Tensor& g) {
        Tensor dl = prob;
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            dl[i * c + j] -= j == tg[i] ? on : off;
          }
        }
        t.AccumulateScaled(logits, dl, g[0] / static_cast<double>(r));
      });
}

namespace {

// Shared shape for the mean-reduced elementwise losses: value(d) and
// derivative(d) with d = x - y.
template <typename Value, typename Deriv>
Var ElementwiseLoss(Var x, Var y, const char* name, Value value, Deriv deriv) {
  Tape& tape = TapeOf(x);
  RequireSameShape(x.value(), y.value(), name);
  const std::size_t n = x.value().size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += value(x.value()[i] - y.value()[i]);
  }
  return tape.Record(Tensor::Scalar(total / static_cast<double>(n),
                                    tape.dtype()),
                     {x, y}, [x, y, n, deriv](Tape& t, const Tensor& g) {
                       Tensor dx(x.value().shape());
                       const double s = g[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         dx[i] = s * deriv(x.value()[i] - y.value()[i]);
                       }
                       t.Accumulate(x, dx);
                       t.AccumulateScaled(y, dx, -1.0);
                     });
}

}  // namespace

Var SmoothL1Mean(Var x, Var y) {
  return ElementwiseLoss(
      x, y, "smooth_l1",
      [](double d) {
        const double a = std::abs(d);
        return a < 1.0 ? 0.5 * d * d : a - 0.5;
      },
      [](double d) {
        return std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
      });
}

Var L1Mean(Var x, Var y) {
  return ElementwiseLoss(
      x, y, "l1", [](double d) { return std::abs(d); },
      [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });
}

Var L2Mean(Var x, Var y) {
  return ElementwiseLoss(
      x, y, "l2", [](double d) { return d * d; },
      [](double d) { return 2.0 * d; });
}

Var RowKLMean(Var x, Var y) {
  Tape& tape = TapeOf(x);
  RequireSameShape(x.value(), y.value(), "kl");
  RequireMatrix(x.value(), "kl");
  constexpr double kEps = 1e-12;
  const std::size_t r = x.value().rows(), c = x.value().cols();
  double total = 0.0;
  std::size_t live_rows = 0;
  for (std::size_t i = 0; i < r; ++i) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      sx += x.value()[i * c + j];
      sy += y.value()[i * c + j];
    }
    if (sy <= 0.0) continue;
    ++live_rows;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = y.value()[i * c + j] / sy;
      if (p <= 0.0) continue;
      const double q = x.value()[i * c + j] / sx + kEps;
      total += p * (std::log(p) - std::log(q));
    }
  }
  const double rows = static_cast<double>(std::max<std::size_t>(live_rows, 1));
  return tape.Record(
      Tensor::Scalar(total / rows, tape.dtype()), {x, y},
      [x, y, r, c, rows](Tape& t, const Tensor& g) {
        // Gradient flows to the prediction only; targets are constants.
        Tensor dx(x.value().shape());
        for (std::size_t i = 0; i < r; ++i) {
          double sx = 0.0, sy = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            sx += x.value()[i * c + j];
            sy += y.value()[i * c + j];
          }
          if (sy <= 0.0) continue;
          double wsum = 0.0;
          std::vector<double> w(c, 0.0);
          for (std::size_t j = 0; j < c; ++j) {
            const double p = y.value()[i * c + j] / sy;
            if (p <= 0.0) continue;
            const double q = x.value()[i * c + j] / sx + kEps;
            w[j] = p / q;
            wsum += w[j] * x.value()[i * c + j];
          }
          for (std::size_t j = 0; j < c; ++j) {
            // d/dx_j of -sum_i p_i log(x_i / sx)
            dx[i * c + j] = g[0] / rows * (-w[j] / sx + wsum / (sx * sx));
          }
        }
        t.Accumulate(x, dx);
      });
}

Var Attention(Var q, Var k, Var v, const Tensor* bias, std::size_t heads,
              AttentionProbe* probe) {
  Tape& tape = TapeOf(q);
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  RequireMatrix(qv, "attention");
  RequireMatrix(kv, "attention");
  RequireMatrix(vv, "attention");
  const std::size_t m = qv.rows(), n = kv.rows(), d = qv.cols();
  Check(kv.cols() == d && vv.cols() == d && vv.rows() == n,
        ErrorCode::kDimension, "attention q/k/v shapes disagree");
  Check(heads > 0 && d % heads == 0, ErrorCode::kDimension,
        "hidden width must divide evenly across heads");
  if (bias != nullptr) {
    Check(bias->rank() == 2 && bias->rows() == m && bias->cols() == n,
          ErrorCode::kDimension,
          "attention bias must be " + std::to_string(m) + "x" +
              std::to_string(n) + ", got " + ShapeString(bias->shape()));
  }
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> probs;
  probs.reserve(heads);
  Tensor out({m, d}, tape.dtype());
  Tensor oh({m, dh});
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = ColumnBlock(qv, h * dh, dh);
    Tensor kt = ColumnBlockTransposed(kv, h * dh, dh);
    Tensor vh = ColumnBlock(vv, h * dh, dh);
    Tensor s({m, n});
    Gemm(qh.data(), kt.data(), s.data(), m, dh, n);
    for (std::size_t i = 0; i < m * n; ++i) {
      s[i] *= scale;
      if (bias != nullptr) s[i] += (*bias)[i];
    }
    SoftmaxInPlace(s.data(), m, n);
    Gemm(s.data(), vh.data(), oh.data(), m, n, dh);
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(oh.data() + i * dh, dh, out.data() + i * d + h * dh);
    }
    if (probe != nullptr) probe->probabilities.push_back(s);
    probs.push_back(std::move(s));
  }
  return tape.Record(
      std::move(out), {q, k, v},
      [q, k, v, probs = std::move(probs), heads, m, n, d, dh, scale](
          Tape& t, const Tensor& g) {
        Tensor dq({m, d}), dk({n, d}), dv({n, d});
        Tensor dp({m, n}), dvh({n, dh}), dqh({m, dh}), dkh({n, dh});
        for (std::size_t h = 0; h < heads; ++h) {
          const Tensor& p = probs[h];
          Tensor goh = ColumnBlock(g, h * dh, dh);
          Tensor vt = ColumnBlockTransposed(v.value(), h * dh, dh);
          Gemm(goh.data(), vt.data(), dp.data(), m, dh, n);
          Tensor pt = TransposeOf(p);
          Gemm(pt.data(), goh.data(), dvh.data(), n, m, dh);
          Tensor ds = SoftmaxBackward(p, dp, m, n);
          for (std::size_t i = 0; i < m * n; ++i) ds[i] *= scale;
          Tensor kh = ColumnBlock(k.value(), h * dh, dh);
          Gemm(ds.data(), kh.data(), dqh.data(), m, n, dh);
          Tensor dst = TransposeOf(ds);
          Tensor qh = ColumnBlock(q.value(), h * dh, dh);
          Gemm(dst.data(), qh.data(), dkh.data(), n, m, dh);
          for (std::size_t i = 0; i < m; ++i) {
            std::copy_n(dqh.data() + i * dh, dh, dq.data() + i * d + h * dh);
          }
          for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(dkh.data() + i * dh, dh, dk.data() + i * d + h * dh);
            std::copy_n(dvh.data() + i * dh, dh, dv.data() + i * d + h * dh);
          }
        }
        t.Accumulate(q, dq);
        t.Accumulate(k, dk);
        t.Accumulate(v, dv);
      });
}

}  // namespace ops
}  // namespace maft
