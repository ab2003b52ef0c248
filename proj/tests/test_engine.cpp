#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cygr/core/array.hpp"
#include "cygr/core/param.hpp"
#include "cygr/core/random.hpp"
#include "support/gradcheck.hpp"

using namespace cygr;
using namespace cygr::ops;
using testsup::FdInput;
using testsup::fd_max_err;

namespace {

std::vector<double> randu(int64_t n, double lo, double hi, uint64_t seed) {
  Rng rng(seed, "test-values");
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("square of a scalar differentiates to twice the input") {
  GraphScope scope;
  Array x = Array::leaf({1}, {3.0});
  Array y = square(x);
  backward(y);
  CHECK(y.item() == doctest::Approx(9.0));
  CHECK(tape().grad_of(x)[0] == doctest::Approx(6.0));
}

TEST_CASE("sigmoid gradient at zero is exactly one quarter") {
  GraphScope scope;
  Array x = Array::leaf({1}, {0.0});
  Array y = sigmoid(x);
  backward(y);
  CHECK(tape().grad_of(x)[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("random multi-op composite matches central differences") {
  std::vector<FdInput> in = {{{4, 3}, randu(12, -1, 1, 11)},
                             {{3, 5}, randu(15, -1, 1, 12)},
                             {{4, 5}, randu(20, -1, 1, 13)}};
  double err = fd_max_err(in, [](const std::vector<Array>& v) {
    Array p = matmul(v[0], v[1]);
    Array q = tanh(p);
    Array r = mul(q, sigmoid(v[2]));
    Array s = add(r, ops::exp(neg(ops::abs(add_scalar(v[2], 2.0)))));
    return mean(s);
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("detach keeps values and blocks gradient flow") {
  GraphScope scope;
  Array x = Array::leaf({1}, {2.0});
  Array y = add(square(x), square(x.detach()));
  backward(y);
  CHECK(y.item() == doctest::Approx(8.0));
  CHECK(tape().grad_of(x)[0] == doctest::Approx(4.0));  // only the tracked branch
}

TEST_CASE("gradients of a value used twice accumulate") {
  GraphScope scope;
  Array x = Array::leaf({3}, {1.0, -2.0, 0.5});
  Array y = add(sum(mul(x, x)), sum(x));
  backward(y);
  const auto& g = tape().grad_of(x);
  for (int i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(2 * x.at(i) + 1).epsilon(1e-12));
}

TEST_CASE("broadcasting follows trailing-dimension rules") {
  GraphScope scope;
  Array a = Array::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  Array row = Array::constant({1, 3}, {10, 20, 30});
  Array col = Array::constant({2, 1}, {100, 200});
  Array r = add(a, row);
  CHECK(r.at(0) == 11);
  CHECK(r.at(5) == 36);
  Array c = mul(a, col);
  CHECK(c.at(0) == 100);
  CHECK(c.at(5) == 1200);
  Array img = Array::full({2, 3, 2, 2}, 1.0);
  Array chan = Array::constant({1, 3, 1, 1}, {1, 2, 3});
  Array s = mul(img, chan);
  CHECK(s.at(0) == 1);
  CHECK(s.at(4) == 2);
  CHECK(s.at(11) == 3);

  double err = fd_max_err({{{2, 3}, randu(6, -1, 1, 3)}, {{1, 3}, randu(3, 0.5, 1.5, 4)}},
                          [](const std::vector<Array>& v) {
                            return sum(div(mul(v[0], v[1]), add_scalar(square(v[1]), 0.5)));
                          });
  CHECK(err <= 1e-4);
}

TEST_CASE("matmul values and gradients") {
  GraphScope scope;
  Array a = Array::constant({2, 2}, {1, 2, 3, 4});
  Array b = Array::constant({2, 2}, {5, 6, 7, 8});
  Array c = matmul(a, b);
  CHECK(c.at(0) == 19);
  CHECK(c.at(3) == 50);
  double err = fd_max_err({{{3, 4}, randu(12, -1, 1, 5)}, {{4, 2}, randu(8, -1, 1, 6)}},
                          [](const std::vector<Array>& v) {
                            return sum(square(matmul(v[0], v[1])));
                          });
  CHECK(err <= 1e-4);
}

TEST_CASE("axis reductions") {
  GraphScope scope;
  Array a = Array::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  Array s0 = sum_axes(a, {0});
  CHECK(s0.shape() == Shape{1, 3});
  CHECK(s0.at(0) == 5);
  CHECK(s0.at(2) == 9);
  Array m1 = mean_axes(a, {1});
  CHECK(m1.at(0) == doctest::Approx(2.0));
  CHECK(m1.at(1) == doctest::Approx(5.0));
  Array bc = Array::full({2, 3, 4, 4}, 2.0);
  Array mc = mean_axes(bc, {0, 2, 3});
  CHECK(mc.shape() == Shape{1, 3, 1, 1});
  CHECK(mc.at(1) == doctest::Approx(2.0));

  double err = fd_max_err({{{2, 3, 2, 2}, randu(24, -1, 1, 7)}},
                          [](const std::vector<Array>& v) {
                            return sum(square(mean_axes(v[0], {0, 2, 3})));
                          });
  CHECK(err <= 1e-4);
}

TEST_CASE("min reduce picks lowest index on ties and routes the gradient there") {
  GraphScope scope;
  Array a = Array::leaf({1, 4}, {3.0, 1.0, 1.0, 2.0});
  auto r = min_reduce(a, 1);
  CHECK(r.indices[0] == 1);
  backward(sum(r.values));
  const auto& g = tape().grad_of(a);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 0.0);

  double err = fd_max_err({{{4, 5}, randu(20, -2, 2, 8)}},
                          [](const std::vector<Array>& v) {
                            return sum(square(min_reduce(v[0], 1).values));
                          });
  CHECK(err <= 1e-4);
}

TEST_CASE("max reduce over rows acts as a permutation-invariant pool") {
  GraphScope scope;
  Array a = Array::constant({3, 2}, {1, 9, 5, 2, 3, 4});
  auto r = max_reduce(a, 0);
  CHECK(r.values.at(0) == 5);
  CHECK(r.values.at(1) == 9);
  double err = fd_max_err({{{6, 3}, randu(18, -2, 2, 9)}},
                          [](const std::vector<Array>& v) {
                            return sum(square(max_reduce(v[0], 0).values));
                          });
  CHECK(err <= 1e-4);
}

TEST_CASE("softmax rows sum to one and match central differences") {
  GraphScope scope;
  Array a = Array::constant({2, 3}, {1, 2, 3, 0, 0, 1000});
  Array s = softmax_rows(a);
  CHECK(s.at(0) + s.at(1) + s.at(2) == doctest::Approx(1.0));
  CHECK(s.at(5) == doctest::Approx(1.0));  // stable under large inputs
  double err = fd_max_err({{{3, 4}, randu(12, -3, 3, 10)}, {{3, 4}, randu(12, -1, 1, 14)}},
                          [](const std::vector<Array>& v) {
                            return sum(mul(softmax_rows(v[0]), v[1]));
                          });
  CHECK(err <= 1e-4);
}

TEST_CASE("column sort orders values and scatters gradients by permutation") {
  GraphScope scope;
  Array a = Array::constant({4, 2}, {4, 1, 1, 3, 3, 4, 2, 2});
  Array s = sort_columns(a);
  CHECK(s.at(0) == 1);
  CHECK(s.at(2) == 2);
  CHECK(s.at(6) == 4);
  CHECK(s.at(1) == 1);
  Array w = Array::constant({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  double err = fd_max_err({{{5, 3}, randu(15, -2, 2, 15)}},
                          [](const std::vector<Array>& v) {
                            Array srt = sort_columns(v[0]);
                            return sum(mul(srt, srt));
                          });
  CHECK(err <= 1e-4);
  (void)w;
}

TEST_CASE("concat, slice, stack and gather round-trip with gradients") {
  GraphScope scope;
  Array a = Array::constant({2, 2}, {1, 2, 3, 4});
  Array b = Array::constant({1, 2}, {5, 6});
  Array cat = concat_rows({a, b});
  CHECK(cat.shape() == Shape{3, 2});
  CHECK(cat.at(4) == 5);
  Array back = slice_rows(cat, 0, 2);
  for (int i = 0; i < 4; ++i) CHECK(back.at(i) == a.at(i));
  Array cc = concat_cols({a, a});
  CHECK(cc.shape() == Shape{2, 4});
  CHECK(cc.at(3) == 2);
  Array g = gather_rows(cat, {2, 0});
  CHECK(g.at(0) == 5);
  CHECK(g.at(2) == 1);
  Array st = stack_cols({Array::constant({3}, {1, 2, 3}), Array::constant({3}, {4, 5, 6})});
  CHECK(st.shape() == Shape{3, 2});
  CHECK(st.at(1) == 4);

  double err = fd_max_err(
      {{{3, 2}, randu(6, -1, 1, 16)}, {{2, 2}, randu(4, -1, 1, 17)}},
      [](const std::vector<Array>& v) {
        Array cat = concat_rows({v[0], v[1]});
        Array picked = gather_rows(cat, {4, 1, 1});
        Array sl = slice_cols(picked, 0, 1);
        return sum(square(concat_cols({sl, sl})));
      });
  CHECK(err <= 1e-4);
}

TEST_CASE("pointwise nonlinearities match central differences") {
  std::vector<FdInput> in = {{{8}, randu(8, 0.2, 2.0, 18)}, {{8}, randu(8, -2, 2, 19)}};
  double err = fd_max_err(in, [](const std::vector<Array>& v) {
    Array pos = v[0];
    Array any = v[1];
    Array y = sum(ops::log(pos));
    y = add(y, sum(ops::sqrt(pos)));
    y = add(y, sum(ops::exp(scale(any, 0.3))));
    y = add(y, sum(elu(any)));
    y = add(y, sum(leaky_relu(any, 0.1)));
    y = add(y, sum(relu(add_scalar(any, 0.05))));
    y = add(y, sum(ops::sin(any)));
    y = add(y, sum(ops::cos(any)));
    y = add(y, sum(ops::abs(add_scalar(any, 3.0))));
    return y;
  });
  CHECK(err <= 1e-4);
}

TEST_CASE("arccos clamps its domain and zeroes the gradient in the clamp") {
  {
    GraphScope scope;
    Array x = Array::leaf({1}, {1.5});
    Array y = arccos(x);
    backward(y);
    CHECK(y.item() == doctest::Approx(std::acos(1.0 - 1e-7)));
    CHECK(tape().grad_of(x)[0] == 0.0);
  }
  double err = fd_max_err({{{3}, {0.3, -0.8, 0.1}}},
                          [](const std::vector<Array>& v) { return sum(arccos(v[0])); });
  CHECK(err <= 1e-4);
}

TEST_CASE("bilinear gather interpolates and clamps at the border") {
  GraphScope scope;
  Array img = Array::constant({1, 2, 2}, {0, 1, 2, 3});
  Array mid = Array::constant({1, 2}, {0.5, 0.5});
  CHECK(bilinear_gather(img, mid).at(0) == doctest::Approx(1.5));
  Array corner = Array::constant({1, 2}, {1.0, 0.0});
  CHECK(bilinear_gather(img, corner).at(0) == doctest::Approx(1.0));
  Array outside = Array::constant({1, 2}, {5.0, -3.0});
  CHECK(bilinear_gather(img, outside).at(0) == doctest::Approx(1.0));  // clamped to (1,0)
  {
    Array c = Array::leaf({1, 2}, {5.0, -3.0});
    Array y = sum(bilinear_gather(img, c));
    backward(y);
    const auto& g = tape().grad_of(c);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
  }
  double err = fd_max_err(
      {{{2, 3, 3}, randu(18, 0, 1, 20)}, {{4, 2}, {0.3, 1.2, 1.7, 0.4, 0.9, 1.9, 1.1, 1.1}}},
      [](const std::vector<Array>& v) { return sum(square(bilinear_gather(v[0], v[1]))); });
  CHECK(err <= 1e-4);
}

namespace {
// independent direct convolution used as the value oracle
std::vector<double> conv_direct(const std::vector<double>& x, int64_t B, int64_t C, int64_t H,
                                int64_t W, const std::vector<double>& w, int64_t K, int64_t kh,
                                int64_t kw, const std::vector<double>& b, int stride, int pad) {
  int64_t OH = (H + 2 * pad - kh) / stride + 1, OW = (W + 2 * pad - kw) / stride + 1;
  std::vector<double> out(B * K * OH * OW, 0.0);
  for (int64_t bi = 0; bi < B; ++bi)
    for (int64_t k = 0; k < K; ++k)
      for (int64_t oi = 0; oi < OH; ++oi)
        for (int64_t oj = 0; oj < OW; ++oj) {
          double acc = b[k];
          for (int64_t c = 0; c < C; ++c)
            for (int64_t ki = 0; ki < kh; ++ki)
              for (int64_t kj = 0; kj < kw; ++kj) {
                int64_t ii = oi * stride + ki - pad, jj = oj * stride + kj - pad;
                if (ii < 0 || ii >= H || jj < 0 || jj >= W) continue;
                acc += x[((bi * C + c) * H + ii) * W + jj] * w[((k * C + c) * kh + ki) * kw + kj];
              }
          out[((bi * K + k) * OH + oi) * OW + oj] = acc;
        }
  return out;
}
}  // namespace

TEST_CASE("conv2d matches a direct convolution and central differences") {
  auto xv = randu(2 * 3 * 5 * 5, -1, 1, 21);
  auto wv = randu(4 * 3 * 3 * 3, -1, 1, 22);
  auto bv = randu(4, -1, 1, 23);
  for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0}}) {
    GraphScope scope;
    Array x = Array::constant({2, 3, 5, 5}, xv);
    Array w = Array::constant({4, 3, 3, 3}, wv);
    Array b = Array::constant({4}, bv);
    Array y = conv2d(x, w, b, stride, pad);
    auto ref = conv_direct(xv, 2, 3, 5, 5, wv, 4, 3, 3, bv, stride, pad);
    REQUIRE(y.size() == static_cast<int64_t>(ref.size()));
    for (size_t i = 0; i < ref.size(); ++i) CHECK(y.at(i) == doctest::Approx(ref[i]).epsilon(1e-10));
  }
  double err = fd_max_err(
      {{{1, 2, 4, 4}, randu(32, -1, 1, 24)},
       {{3, 2, 3, 3}, randu(54, -1, 1, 25)},
       {{3}, randu(3, -1, 1, 26)}},
      [](const std::vector<Array>& v) {
        return sum(square(conv2d(v[0], v[1], v[2], 2, 1)));
      },
      1e-5, 40);
  CHECK(err <= 1e-4);
}

TEST_CASE("transposed convolution is the adjoint of convolution") {
  auto xv = randu(1 * 2 * 6 * 6, -1, 1, 27);
  auto wv = randu(3 * 2 * 3 * 3, -1, 1, 28);
  auto yv = randu(1 * 3 * 3 * 3, -1, 1, 29);
  GraphScope scope;
  Array x = Array::constant({1, 2, 6, 6}, xv);
  Array w = Array::constant({3, 2, 3, 3}, wv);
  Array y = Array::constant({1, 3, 3, 3}, yv);
  Array zero_b = Array::zeros({3});
  Array cx = conv2d(x, w, zero_b, 2, 1);  // [1,3,3,3]
  Array ty = conv2d_transpose(y, w, 2, 1, 1);  // [1,2,6,6]
  REQUIRE(ty.shape() == Shape{1, 2, 6, 6});
  double lhs = sum(mul(cx, y)).item();
  double rhs = sum(mul(x, ty)).item();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

  double err = fd_max_err(
      {{{1, 3, 3, 3}, yv}, {{3, 2, 3, 3}, wv}},
      [](const std::vector<Array>& v) {
        return sum(square(conv2d_transpose(v[0], v[1], 2, 1, 1)));
      },
      1e-5, 40);
  CHECK(err <= 1e-4);
}

TEST_CASE("average pooling and nearest upsampling") {
  GraphScope scope;
  Array x = Array::constant({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(avgpool2(x).at(0) == doctest::Approx(2.5));
  Array u = upsample2_nearest(x);
  CHECK(u.shape() == Shape{1, 1, 4, 4});
  CHECK(u.at(0) == 1);
  CHECK(u.at(2) == 2);
  CHECK(u.at(5) == 1);
  double err = fd_max_err({{{1, 2, 4, 4}, randu(32, -1, 1, 30)}},
                          [](const std::vector<Array>& v) {
                            return sum(square(upsample2_nearest(avgpool2(v[0]))));
                          });
  CHECK(err <= 1e-4);
}

TEST_CASE("reshape aliases data and passes gradients through") {
  GraphScope scope;
  Array x = Array::leaf({2, 3}, {1, 2, 3, 4, 5, 6});
  Array y = x.reshape({3, 2});
  Array z = sum(square(y));
  backward(z);
  const auto& g = tape().grad_of(x);
  for (int i = 0; i < 6; ++i) CHECK(g[i] == doctest::Approx(2.0 * (i + 1)));
}

TEST_CASE("parameters accumulate tape gradients and Adam descends") {
  Parameter w("w", {1}, {0.0});
  Adam opt({&w}, 0.1, 0.9, 0.999);
  for (int i = 0; i < 300; ++i) {
    GraphScope scope;
    Array loss = square(add_scalar(w.use(), -3.0));
    backward(loss);
    opt.zero_grad();
    opt.collect_grads();
    opt.step();
  }
  CHECK(w.data()[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("frozen parameters stay out of the gradient while values flow") {
  Parameter w("w", {1}, {2.0});
  GraphScope scope;
  Array x = Array::leaf({1}, {5.0});
  Array y = mul(x, w.frozen());
  backward(y);
  CHECK(y.item() == doctest::Approx(10.0));
  CHECK(tape().grad_of(x)[0] == doctest::Approx(2.0));
  w.accumulate_from_tape();
  CHECK(w.grad[0] == 0.0);
}

TEST_CASE("counter-based random streams are reproducible and independent") {
  Rng a(42, "batch", 7), b(42, "batch", 7), c(42, "batch", 8), d(42, "pose", 7);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(c.next_u64() != Rng(42, "batch", 7).next_u64());
  CHECK(d.next_u64() != Rng(42, "batch", 7).next_u64());
  Rng n(1, "normal");
  double s = 0, s2 = 0;
  const int N = 20000;
  for (int i = 0; i < N; ++i) {
    double z = n.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / N) < 0.03);
  CHECK(std::abs(s2 / N - 1.0) < 0.05);
}
