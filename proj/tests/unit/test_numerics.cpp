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

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "maft/autograd.hpp"
#include "maft/container.hpp"
#include "maft/error.hpp"
#include "maft/flops.hpp"
#include "maft/optim.hpp"
#include "maft/tensor.hpp"
#include "test_util.hpp"

namespace maft {
namespace {

using testing::RandomTensor;
constexpr double kInf = std::numeric_limits<double>::infinity();

Tensor Eval(const std::function<Var(Tape&)>& f) {
  Tape tape(DType::kFloat64, false);
  return f(tape).value();
}

// ||a - n|| / max(||a||, ||n||, 1e-8) over every element of an input.
double NormRelError(const Tensor& a, const Tensor& n) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Checks the gradient of sum(R * f(inputs)) for a fixed random R against
// central differences, input by input.
void ExpectGradientMatches(const std::vector<Tensor>& inputs, const Builder& f,
                           double tolerance = 1e-4) {
  Tensor weights;
  auto loss_of = [&](Tape& tape, const std::vector<Var>& vars) {
    Var out = f(tape, vars);
    if (weights.empty()) weights = RandomTensor(out.value().shape(), 99);
    return ops::Sum(ops::Mul(out, tape.Constant(weights)));
  };
  ParameterSet params;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    params.Add("x" + std::to_string(i), inputs[i]);
  Tape tape(DType::kFloat64);
  std::vector<Var> vars;
  for (const Parameter& p : params) vars.push_back(tape.Watch(p));
  const Gradients grads = tape.Backward(loss_of(tape, vars));

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto scalar = [&](const Tensor& xi) {
      Tape t(DType::kFloat64, false);
      std::vector<Var> vs;
      for (std::size_t j = 0; j < inputs.size(); ++j)
        vs.push_back(t.Constant(j == i ? xi : inputs[j]));
      return loss_of(t, vs).value().item();
    };
    const Tensor numeric = FiniteDifferenceGradient(scalar, inputs[i], 1e-6);
    const Tensor& analytic = grads.at("x" + std::to_string(i));
    EXPECT_LE(NormRelError(analytic, numeric), tolerance) << "input " << i;
  }
}

TEST(Tensor, BufferMatchesShape) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_MAFT_ERROR(Tensor({2, 2}, {1.0, 2.0, 3.0}), ErrorCode::kDimension);
  EXPECT_MAFT_ERROR(Tensor({0, 2}), ErrorCode::kDimension);
}

TEST(Tensor, Float32StorageIsRepresentable) {
  Tensor t({3}, {0.1, 1.0 / 3.0, 1e-9}, DType::kFloat32);
  t.Quantize();
  for (double v : t.values()) {
    EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
  }
}

TEST(Tensor, FiniteChecks) {
  Tensor bias({2}, {0.0, -kInf});
  EXPECT_FALSE(bias.AllFinite());
  EXPECT_TRUE(bias.FiniteOrNegInf());
  Tensor bad({1}, {std::nan("")});
  EXPECT_FALSE(bad.FiniteOrNegInf());
}

TEST(MatMul, Examples) {
  Tensor eye = Tensor::Matrix(2, 2, {1, 0, 0, 1});
  Tensor a = Tensor::Matrix(2, 2, {1, 2, 3, 4});
  Tensor col = Tensor::Matrix(2, 1, {0, 1});
  auto mm = [](const Tensor& x, const Tensor& y) {
    return Eval([&](Tape& t) {
      return ops::MatMul(t.Constant(x), t.Constant(y));
    });
  };
  EXPECT_TRUE(BitwiseEqual(mm(eye, a), a));
  EXPECT_TRUE(BitwiseEqual(mm(a, col), Tensor::Matrix(2, 1, {2, 4})));
  EXPECT_EQ(mm(Tensor::Matrix(1, 1, {3}), Tensor::Matrix(1, 1, {4}))[0], 12.0);
  EXPECT_MAFT_ERROR(mm(col, col), ErrorCode::kDimension);
}

TEST(Softmax, Examples) {
  auto sm = [](const Tensor& x) {
    return Eval([&](Tape& t) { return ops::SoftmaxRows(t.Constant(x)); });
  };
  Tensor u = sm(Tensor::Matrix(1, 3, {0, 0, 0}));
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  Tensor l = sm(Tensor::Matrix(1, 2, {0, std::log(2.0)}));
  EXPECT_NEAR(l[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(l[1], 2.0 / 3.0, 1e-15);
  Tensor m = sm(Tensor::Matrix(1, 2, {0, -kInf}));
  EXPECT_EQ(m[0], 1.0);
  EXPECT_EQ(m[1], 0.0);
  EXPECT_MAFT_ERROR(sm(Tensor::Matrix(1, 2, {-kInf, -kInf})),
                    ErrorCode::kNumeric);
}

TEST(Softmax, RowsAreDistributions) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tensor x = RandomTensor({4, 7}, seed, 10.0);
    Tensor p = Eval([&](Tape& t) { return ops::SoftmaxRows(t.Constant(x)); });
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GE(p.at(r, c), 0.0);
        EXPECT_LE(p.at(r, c), 1.0);
        s += p.at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(LayerNorm, Examples) {
  auto ln = [](const Tensor& x, const Tensor& g, const Tensor& b, double eps) {
    return Eval([&](Tape& t) {
      return ops::LayerNorm(t.Constant(x), t.Constant(g), t.Constant(b), eps);
    });
  };
  Tensor ones2({2}, {1, 1}), zeros2({2}, {0, 0});
  Tensor c = ln(Tensor::Matrix(1, 2, {5, 5}), ones2, zeros2, 1e-5);
  EXPECT_EQ(c[0], 0.0);
  EXPECT_EQ(c[1], 0.0);
  Tensor n = ln(Tensor::Matrix(1, 2, {1, -1}), ones2, zeros2, 1e-12);
  EXPECT_NEAR(n[0], 1.0, 1e-9);
  EXPECT_NEAR(n[1], -1.0, 1e-9);
  Tensor b({2}, {0.25, -3.0});
  Tensor z = ln(RandomTensor({1, 2}, 4), zeros2, b, 1e-5);
  EXPECT_EQ(z[0], 0.25);
  EXPECT_EQ(z[1], -3.0);
}

TEST(LayerNorm, NormalizesLastAxis) {
  Tensor x = RandomTensor({3, 16}, 8, 4.0);
  Tensor g = Tensor::Full({16}, 1.0), b = Tensor::Zeros({16});
  Tensor y = Eval([&](Tape& t) {
    return ops::LayerNorm(t.Constant(x), t.Constant(g), t.Constant(b), 1e-5);
  });
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 16; ++c) mean += y.at(r, c) / 16.0;
    for (std::size_t c = 0; c < 16; ++c)
      var += (y.at(r, c) - mean) * (y.at(r, c) - mean) / 16.0;
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(Gelu, Asymptotes) {
  Tensor y = Eval([](Tape& t) {
    return ops::Gelu(t.Constant(Tensor({3}, {0.0, 10.0, -10.0})));
  });
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 10.0, 1e-4);
  EXPECT_NEAR(y[2], 0.0, 1e-4);
}

TEST(Backward, SumOfWeights) {
  ParameterSet ps;
  ps.Add("w", RandomTensor({2, 2}, 1));
  ps.Add("u", RandomTensor({2, 2}, 2));
  Tape tape;
  Var w = tape.Watch(ps.Get("w"));
  tape.Watch(ps.Get("u"));
  const Gradients g = tape.Backward(ops::Sum(w));
  for (double v : g.at("w").values()) EXPECT_EQ(v, 1.0);
  for (double v : g.at("u").values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  ParameterSet ps;
  ps.Add("w", RandomTensor({2, 2}, 1));
  Tape tape;
  Var w = tape.Watch(ps.Get("w"));
  EXPECT_MAFT_ERROR(tape.Backward(w), ErrorCode::kDimension);
}

TEST(Backward, WatchIsDeduplicated) {
  ParameterSet ps;
  ps.Add("w", Tensor::Matrix(1, 1, {3.0}));
  Tape tape;
  Var a = tape.Watch(ps.Get("w"));
  Var b = tape.Watch(ps.Get("w"));
  EXPECT_EQ(a.id(), b.id());
  const Gradients g = tape.Backward(ops::Sum(ops::Mul(a, b)));
  EXPECT_EQ(g.at("w")[0], 6.0);
}

TEST(Backward, FrozenParameterGetsNoGradient) {
  ParameterSet ps;
  ps.Add("w", RandomTensor({2, 2}, 1), false);
  Tape tape;
  Var w = tape.Watch(ps.Get("w"));
  EXPECT_FALSE(tape.requires_grad(w));
  const Gradients g = tape.Backward(ops::Sum(ops::Mul(w, w)));
  EXPECT_FALSE(g.contains("w"));
}

TEST(Backward, MatMulSumAgainstFiniteDifferences) {
  ExpectGradientMatches(
      {RandomTensor({3, 4}, 1), RandomTensor({4, 2}, 2)},
      [](Tape&, const std::vector<Var>& v) { return ops::MatMul(v[0], v[1]); });
}

TEST(Backward, Deterministic) {
  auto run = [] {
    ParameterSet ps;
    ps.Add("w", RandomTensor({5, 6}, 3));
    Tape tape;
    Var w = tape.Watch(ps.Get("w"));
    Var y = ops::SoftmaxRows(ops::Gelu(ops::MatMulTransposed(w, w)));
    return tape.Backward(ops::Mean(ops::Mul(y, y))).at("w");
  };
  EXPECT_TRUE(BitwiseEqual(run(), run()));
}

// Every differentiable op against central differences on small tensors.
TEST(OpGradients, Elementwise) {
  const Tensor a = RandomTensor({3, 5}, 11), b = RandomTensor({3, 5}, 12);
  ExpectGradientMatches({a, b}, [](Tape&, const std::vector<Var>& v) {
    return ops::Add(v[0], v[1]);
  });
  ExpectGradientMatches({a, b}, [](Tape&, const std::vector<Var>& v) {
    return ops::Sub(v[0], v[1]);
  });
  ExpectGradientMatches({a, b}, [](Tape&, const std::vector<Var>& v) {
    return ops::Mul(v[0], v[1]);
  });
  ExpectGradientMatches({a}, [](Tape&, const std::vector<Var>& v) {
    return ops::Scale(v[0], -1.7);
  });
  ExpectGradientMatches({a}, [](Tape&, const std::vector<Var>& v) {
    return ops::Gelu(v[0]);
  });
  ExpectGradientMatches({a, RandomTensor({5}, 13)},
                        [](Tape&, const std::vector<Var>& v) {
                          return ops::AddBias(v[0], v[1]);
                        });
}

TEST(OpGradients, Products) {
  ExpectGradientMatches({RandomTensor({4, 3}, 21), RandomTensor({5, 3}, 22)},
                        [](Tape&, const std::vector<Var>& v) {
                          return ops::MatMulTransposed(v[0], v[1]);
                        });
  ExpectGradientMatches({RandomTensor({4, 3}, 23)},
                        [](Tape&, const std::vector<Var>& v) {
                          return ops::Transpose(v[0]);
                        });
}

TEST(OpGradients, Normalizations) {
  ExpectGradientMatches({RandomTensor({3, 6}, 31, 3.0)},
                        [](Tape&, const std::vector<Var>& v) {
                          return ops::SoftmaxRows(v[0]);
                        });
  ExpectGradientMatches(
      {RandomTensor({3, 6}, 32), RandomTensor({6}, 33), RandomTensor({6}, 34)},
      [](Tape&, const std::vector<Var>& v) {
        return ops::LayerNorm(v[0], v[1], v[2], 1e-5);
      });
  ExpectGradientMatches({RandomTensor({3, 6}, 35)},
                        [](Tape&, const std::vector<Var>& v) {
                          return ops::L2NormalizeRows(v[0]);
                        });
}

TEST(OpGradients, Reductions) {
  const Tensor a = RandomTensor({4, 3}, 41);
  ExpectGradientMatches({a}, [](Tape&, const std::vector<Var>& v) {
    return ops::Sum(v[0]);
  });
  ExpectGradientMatches({a}, [](Tape&, const std::vector<Var>& v) {
    return ops::Mean(v[0]);
  });
}

TEST(OpGradients, Slicing) {
  const Tensor a = RandomTensor({5, 4}, 51);
  ExpectGradientMatches({a}, [](Tape&, const std::vector<Var>& v) {
    return ops::Rows(v[0], 1, 3);
  });
  ExpectGradientMatches({a}, [](Tape&, const std::vector<Var>& v) {
    return ops::Cols(v[0], 2, 2);
  });
  ExpectGradientMatches({a, RandomTensor({2, 4}, 52)},
                        [](Tape&, const std::vector<Var>& v) {
                          return ops::ConcatRows(std::vector<Var>{v[0], v[1]});
                        });
  ExpectGradientMatches({RandomTensor({1, 4}, 53)},
                        [](Tape&, const std::vector<Var>& v) {
                          return ops::RepeatRows(v[0], 3);
                        });
  ExpectGradientMatches({a}, [](Tape&, const std::vector<Var>& v) {
    const std::vector<std::size_t> cols = {3, 0, 3};
    return ops::GatherColumns(v[0], cols);
  });
}

TEST(OpGradients, Losses) {
  const std::vector<std::size_t> targets = {2, 0, 1};
  for (double smoothing : {0.0, 0.1}) {
    ExpectGradientMatches({RandomTensor({3, 4}, 61, 2.0)},
                          [&](Tape&, const std::vector<Var>& v) {
                            return ops::CrossEntropy(v[0], targets, smoothing);
                          });
  }
  // Offsets keep every |x - y| away from the SmoothL1 breakpoint at 1.
  Tensor x({2, 4}, {0.1, 0.4, 2.0, -3.0, 0.7, -0.2, 1.6, 0.0});
  Tensor y({2, 4}, {0.3, 0.0, 0.5, -0.5, 0.2, 0.3, 0.1, 0.55});
  ExpectGradientMatches({x, y}, [](Tape&, const std::vector<Var>& v) {
    return ops::SmoothL1Mean(v[0], v[1]);
  });
  ExpectGradientMatches({x, y}, [](Tape&, const std::vector<Var>& v) {
    return ops::L1Mean(v[0], v[1]);
  });
  ExpectGradientMatches({x, y}, [](Tape&, const std::vector<Var>& v) {
    return ops::L2Mean(v[0], v[1]);
  });
  Tensor p({2, 3}, {0.2, 0.5, 0.3, 0.1, 0.1, 0.8});
  Tensor q({2, 3}, {0.3, 0.3, 0.4, 0.25, 0.5, 0.25});
  // The KL target is a constant by contract.
  ExpectGradientMatches({q}, [&p](Tape& t, const std::vector<Var>& v) {
    return ops::RowKLMean(v[0], t.Constant(p));
  });
}

TEST(OpGradients, Attention) {
  Tensor bias({3, 5}, {0, -kInf, 0, 0, -kInf,   //
                       -kInf, 0, 0, -kInf, 0,   //
                       0, 0, 0, 0, 0});
  for (const Tensor* b : std::vector<const Tensor*>{nullptr, &bias}) {
    ExpectGradientMatches(
        {RandomTensor({3, 4}, 71), RandomTensor({5, 4}, 72),
         RandomTensor({5, 4}, 73)},
        [b](Tape&, const std::vector<Var>& v) {
          return ops::Attention(v[0], v[1], v[2], b, 2);
        });
  }
}

TEST(Attention, MaskedPositionsGetZeroWeight) {
  Tensor bias({2, 4}, {0, -kInf, 0, -kInf, -kInf, 0, -kInf, 0});
  ops::AttentionProbe probe;
  Tape tape(DType::kFloat64, false);
  ops::Attention(tape.Constant(RandomTensor({2, 4}, 1)),
                 tape.Constant(RandomTensor({4, 4}, 2)),
                 tape.Constant(RandomTensor({4, 4}, 3)), &bias, 2, &probe);
  ASSERT_EQ(probe.probabilities.size(), 2u);
  for (const Tensor& p : probe.probabilities) {
    for (std::size_t i = 0; i < bias.size(); ++i) {
      if (bias[i] == -kInf) {
        EXPECT_EQ(p[i], 0.0);
      }
    }
  }
}

TEST(AdamW, ZeroGradientWithoutDecayIsNoop) {
  ParameterSet ps;
  ps.Add("w", RandomTensor({3}, 1));
  const Tensor before = ps.Get("w").value;
  Gradients g{{"w", Tensor::Zeros({3})}};
  AdamWState state;
  AdamWStep(ps, g, {.lr = 0.1, .weight_decay = 0.0}, state);
  EXPECT_TRUE(BitwiseEqual(ps.Get("w").value, before));
}

TEST(AdamW, DecoupledDecay) {
  ParameterSet ps;
  ps.Add("w", Tensor({2}, {2.0, -4.0}));
  Gradients g{{"w", Tensor::Zeros({2})}};
  AdamWState state;
  AdamWStep(ps, g, {.lr = 0.1, .weight_decay = 0.5}, state);
  EXPECT_DOUBLE_EQ(ps.Get("w").value[0], 2.0 * (1.0 - 0.05));
  EXPECT_DOUBLE_EQ(ps.Get("w").value[1], -4.0 * (1.0 - 0.05));
}

TEST(AdamW, FirstStepOnSquareByHand) {
  // f(w) = w^2 at w = 1: g = 2, m = 0.2, v = 0.004, bias-corrected
  // m_hat = 2, v_hat = 4, step = lr * 2 / (2 + eps).
  ParameterSet ps;
  ps.Add("w", Tensor({1}, {1.0}));
  Gradients g{{"w", Tensor({1}, {2.0})}};
  AdamWState state;
  const AdamWOptions opt{.lr = 0.01};
  AdamWStep(ps, g, opt, state);
  const double expected = 1.0 - opt.lr * 2.0 / (2.0 + opt.eps);
  EXPECT_NEAR(ps.Get("w").value[0], expected, 1e-15);
  EXPECT_LT(ps.Get("w").value[0], 1.0);
  EXPECT_EQ(state.step, 1);
}

TEST(AdamW, FrozenParameterBitwiseUnchanged) {
  ParameterSet ps;
  ps.Add("frozen", RandomTensor({4}, 1), false);
  ps.Add("live", RandomTensor({4}, 2));
  const Tensor before = ps.Get("frozen").value;
  Gradients g{{"frozen", RandomTensor({4}, 3)}, {"live", RandomTensor({4}, 4)}};
  AdamWState state;
  for (int i = 0; i < 5; ++i)
    AdamWStep(ps, g, {.lr = 0.1, .weight_decay = 0.1}, state);
  EXPECT_TRUE(BitwiseEqual(ps.Get("frozen").value, before));
}

TEST(FiniteDifference, Examples) {
  auto sq = [](const Tensor& x) { return x[0] * x[0]; };
  EXPECT_NEAR(FiniteDifferenceGradient(sq, Tensor({1}, {3.0}), 1e-4)[0], 6.0,
              1e-8);
  auto constant = [](const Tensor&) { return 4.0; };
  Tensor z = FiniteDifferenceGradient(constant, Tensor({2}, {1.0, 2.0}), 1e-4);
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
  auto xy = [](const Tensor& x) { return x[0] * x[1]; };
  Tensor g = FiniteDifferenceGradient(xy, Tensor({2}, {2.0, 5.0}), 1e-4);
  EXPECT_NEAR(g[0], 5.0, 1e-8);
  EXPECT_NEAR(g[1], 2.0, 1e-8);
}

TEST(Flops, GemmCountsMultiplyAccumulates) {
  FlopTally tally;
  {
    FlopScope scope(tally);
    FlopStreamScope stream(FlopStream::kFeatureStream);
    Tape t(DType::kFloat64, false);
    ops::MatMul(t.Constant(RandomTensor({3, 4}, 1)),
                t.Constant(RandomTensor({4, 5}, 2)));
  }
  EXPECT_EQ(tally[FlopStream::kFeatureStream], 60u);
  EXPECT_EQ(tally.Total(), 60u);
}

TEST(Container, RoundTripIsBitwise) {
  testing::TempDir dir("container");
  TensorFile file;
  Tensor a = RandomTensor({2, 3}, 1, 1.0, DType::kFloat32);
  Tensor b = RandomTensor({4}, 2);
  file.Put("a", a);
  file.Put("b", b);
  file.SetMeta("info", "key", "value with spaces");
  file.Save(dir.file("f.maft"));
  const TensorFile back = TensorFile::Load(dir.file("f.maft"));
  EXPECT_TRUE(BitwiseEqual(back.Get("a"), a));
  EXPECT_EQ(back.Get("a").dtype(), DType::kFloat32);
  EXPECT_TRUE(BitwiseEqual(back.Get("b"), b));
  EXPECT_EQ(back.Meta("info", "key").value(), "value with spaces");
  EXPECT_MAFT_ERROR(back.Get("missing"), ErrorCode::kFormat);
}

TEST(Container, RejectsForeignFiles) {
  testing::TempDir dir("container_bad");
  {
    std::FILE* f = std::fopen(dir.file("bad").c_str(), "wb");
    std::fputs("NOTAMAFTFILE....header", f);
    std::fclose(f);
  }
  EXPECT_MAFT_ERROR(TensorFile::Load(dir.file("bad")), ErrorCode::kFormat);
  EXPECT_MAFT_ERROR(TensorFile::Load(dir.file("absent")), ErrorCode::kIo);
}

}  // namespace
}  // namespace maft
