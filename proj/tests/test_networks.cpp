#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cygr/dist/wgan.hpp"
#include "cygr/geom/transform.hpp"
#include "cygr/net/checkpoint.hpp"
#include "cygr/net/nets.hpp"
#include "cygr/render/texture.hpp"

using namespace cygr;
using namespace cygr::net;
using cygr::ops::add;
using cygr::ops::concat_cols;
using cygr::ops::mean;
using cygr::ops::mul;
using cygr::ops::sub;
using cygr::ops::sum;

namespace {

std::vector<double> randn(Rng& rng, int64_t n) { return rng.normals(n); }

void check_rotation_rows(const Array& rots, double tol = 1e-9) {
  REQUIRE(rots.ndim() == 2);
  REQUIRE(rots.dim(1) == 9);
  for (int64_t b = 0; b < rots.dim(0); ++b) {
    const double* R = rots.data().data() + b * 9;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0;
        for (int k = 0; k < 3; ++k) dot += R[i * 3 + k] * R[j * 3 + k];
        CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(tol));
      }
    double det = R[0] * (R[4] * R[8] - R[5] * R[7]) - R[1] * (R[3] * R[8] - R[5] * R[6]) +
                 R[2] * (R[3] * R[7] - R[4] * R[6]);
    CHECK(det == doctest::Approx(1.0).epsilon(tol));
  }
}

double max_abs_diff(const Array& a, const Array& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0;
  for (int64_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.at(i) - b.at(i)));
  return worst;
}

// jitter every parameter so constant-initialized scales/shifts do not hide
// sign or ordering mistakes
void perturb_params(ParamRegistry& reg, uint64_t seed) {
  Rng rng(seed, "perturb");
  for (Parameter* p : reg.all())
    for (double& v : *p->value) v += rng.uniform(-0.05, 0.05);
}

}  // namespace

TEST_CASE("shape encoder is invariant to point order and duplication") {
  NetworkConfig cfg = NetworkConfig::desk();
  ParamRegistry reg(3);
  PointNetEncoder enc(reg, "fv", cfg);
  Rng rng(40, "cloud");
  int64_t n = 40;
  std::vector<double> pts = randn(rng, n * 6);

  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<double> shuffled(n * 6), doubled(2 * n * 6);
  for (int64_t i = 0; i < n; ++i)
    for (int k = 0; k < 6; ++k) shuffled[i * 6 + k] = pts[order[i] * 6 + k];
  for (int64_t i = 0; i < n; ++i)
    for (int k = 0; k < 6; ++k) {
      doubled[i * 6 + k] = pts[i * 6 + k];
      doubled[(n + i) * 6 + k] = pts[i * 6 + k];
    }

  for (bool training : {false, true}) {
    GraphScope scope;
    Array base = enc(Array::constant({n, 6}, pts), training);
    Array perm = enc(Array::constant({n, 6}, shuffled), training);
    Array dup = enc(Array::constant({2 * n, 6}, doubled), training);
    REQUIRE(base.shape() == Shape{1, cfg.dim_v});
    CHECK(max_abs_diff(base, perm) < 1e-12);
    CHECK(max_abs_diff(base, dup) < 1e-12);
  }
}

TEST_CASE("full-size profile meets the latent and pose contracts") {
  NetworkConfig cfg = NetworkConfig::paper();
  ParamRegistry reg(4);
  PointNetEncoder f_v(reg, "fv", cfg);
  OffsetDecoder f_d(reg, "fd", cfg);
  PoseDecoder f_p(reg, "fp", cfg);
  InferenceHeads heads(reg, "heads", cfg);
  Rng rng(41, "paper");

  GraphScope scope;
  Array v = f_v(Array::constant({1000, 6}, randn(rng, 6000)), false);
  CHECK(v.shape() == Shape{1, 64});
  Array offsets = f_d(v, false);
  CHECK(offsets.shape() == Shape{1, 1002 * 3});

  PoseBatch pose = f_p(Array::constant({3, 16}, randn(rng, 48)), false);
  CHECK(pose.rotations.shape() == Shape{3, 9});
  check_rotation_rows(pose.rotations);
  for (int64_t b = 0; b < 3; ++b) {
    double tx = pose.translations.at(b * 3), ty = pose.translations.at(b * 3 + 1);
    double tz = pose.translations.at(b * 3 + 2);
    CHECK(std::abs(tx) < cfg.box_xy);
    CHECK(std::abs(ty) < cfg.box_xy);
    CHECK(tz > cfg.box_z_lo);
    CHECK(tz < cfg.box_z_hi);
  }

  Hypotheses hyp = heads(Array::constant({2, 512}, randn(rng, 1024)), false);
  CHECK(hyp.v.shape() == Shape{2, 64});
  CHECK(hyp.poses.rotations.shape() == Shape{2 * 4, 9});
  check_rotation_rows(hyp.poses.rotations);
  CHECK(hyp.probabilities.shape() == Shape{2, 4});
  for (int64_t b = 0; b < 2; ++b) {
    double s = 0;
    for (int h = 0; h < 4; ++h) s += hyp.probabilities.at(b * 4 + h);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("batch normalization tracks running statistics and is affine in eval") {
  ParamRegistry reg(5);
  BatchNorm1d bn(reg, "bn", 3);
  perturb_params(reg, 50);
  Rng rng(42, "bn");
  std::vector<double> xv = randn(rng, 8 * 3);

  GraphScope scope;
  Array y = bn(Array::constant({8, 3}, xv), true);
  for (int64_t f = 0; f < 3; ++f) {
    double m = 0, s2 = 0, gm = 0, gv = 0;
    for (int64_t b = 0; b < 8; ++b) m += xv[b * 3 + f] / 8;
    for (int64_t b = 0; b < 8; ++b) s2 += (xv[b * 3 + f] - m) * (xv[b * 3 + f] - m) / 8;
    // one training call folds the batch statistics into the running ones
    CHECK((*bn.running_mean)[f] == doctest::Approx(0.1 * m).epsilon(1e-12));
    CHECK((*bn.running_var)[f] == doctest::Approx(0.9 + 0.1 * s2).epsilon(1e-12));
    for (int64_t b = 0; b < 8; ++b) gm += y.at(b * 3 + f) / 8;
    for (int64_t b = 0; b < 8; ++b) gv += (y.at(b * 3 + f) - gm) * (y.at(b * 3 + f) - gm) / 8;
    CHECK(gm == doctest::Approx(bn.beta->data()[f]).epsilon(1e-9));
    double g = bn.gamma->data()[f];
    CHECK(gv == doctest::Approx(g * g).epsilon(1e-3));
  }

  // eval mode must be an affine map with slope eval_slope()
  std::vector<double> x1 = randn(rng, 2 * 3), x2 = randn(rng, 2 * 3);
  Array y1 = bn(Array::constant({2, 3}, x1), false);
  Array y2 = bn(Array::constant({2, 3}, x2), false);
  Array slope = bn.eval_slope();
  for (int64_t i = 0; i < 6; ++i) {
    double expect = slope.at(i % 3) * (x1[i] - x2[i]);
    CHECK(y1.at(i) - y2.at(i) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("texture decoder emits a bounded image with matching nodal colours") {
  NetworkConfig cfg = NetworkConfig::desk();
  ParamRegistry reg(6);
  TextureDecoder f_t(reg, "ft", cfg);
  Rng rng(43, "tex");
  int64_t V = cfg.n_vertices, S = cfg.image_size;
  std::vector<double> uvv(V * 2);
  for (double& u : uvv) u = rng.uniform();
  Array uv = Array::constant({V, 2}, uvv);

  GraphScope scope;
  Array xi = Array::leaf({2, cfg.dim_xi_t}, randn(rng, 2 * cfg.dim_xi_t));
  Array mesh = Array::leaf({2, V * 3}, randn(rng, 2 * V * 3));
  TextureOut out = f_t(xi, mesh, uv, true);
  REQUIRE(out.image.shape() == Shape{2, 3, S, S});
  REQUIRE(out.nodal.shape() == Shape{2, V * 3});
  for (int64_t i = 0; i < out.image.size(); ++i) {
    CHECK(out.image.at(i) > -1.0);
    CHECK(out.image.at(i) < 1.0);
  }
  for (int64_t i = 0; i < out.nodal.size(); ++i) {
    CHECK(out.nodal.at(i) >= 0.0);
    CHECK(out.nodal.at(i) <= 1.0);
  }

  // nodal colours are the image sampled at the template uv coordinates
  Array tex1 = ops::slice_rows(out.image.reshape({2, 3 * S * S}), 1, 2).detach();
  Array manual = render::to_unit_range(render::uv_sample(tex1.reshape({3, S, S}), uv));
  Array row1 = ops::slice_rows(out.nodal, 1, 2);
  CHECK(max_abs_diff(manual.reshape({1, V * 3}), row1) < 1e-12);

  // gradients flow into the latent but never into the node positions
  backward(add(sum(out.image), sum(out.nodal)));
  CHECK(tape().has_grad(xi.node()));
  CHECK_FALSE(tape().has_grad(mesh.node()));
}

TEST_CASE("image encoder contracts rgba batches to the latent width") {
  NetworkConfig cfg = NetworkConfig::desk();
  ParamRegistry reg(7);
  ImageEncoder h_q(reg, "hq", cfg);
  Rng rng(44, "img");
  int64_t S = cfg.image_size;

  GraphScope scope;
  std::vector<double> xv = randn(rng, 2 * 4 * S * S);
  Array q1 = h_q(Array::constant({2, 4, S, S}, xv), false);
  Array q2 = h_q(Array::constant({2, 4, S, S}, xv), false);
  CHECK(q1.shape() == Shape{2, cfg.dim_q});
  CHECK(max_abs_diff(q1, q2) == 0.0);  // eval mode is deterministic
  CHECK_THROWS_AS(h_q(Array::constant({1, 3, S, S}, randn(rng, 3 * S * S)), false),
                  std::invalid_argument);
}

TEST_CASE("inference heads keep hypotheses grouped by sample") {
  NetworkConfig cfg = NetworkConfig::desk();
  ParamRegistry reg(8);
  InferenceHeads heads(reg, "heads", cfg);
  Rng rng(45, "heads");
  std::vector<double> qv = randn(rng, 2 * cfg.dim_q);
  std::vector<double> qv2 = qv;
  for (int64_t i = cfg.dim_q; i < 2 * cfg.dim_q; ++i) qv2[i] += 0.5;  // change sample 1 only

  GraphScope scope;
  Hypotheses a = heads(Array::constant({2, cfg.dim_q}, qv), false);
  Hypotheses b = heads(Array::constant({2, cfg.dim_q}, qv2), false);
  check_rotation_rows(a.poses.rotations);
  int n_h = cfg.n_h;
  double same = 0, diff = 0;
  for (int64_t r = 0; r < n_h; ++r)
    for (int64_t k = 0; k < 9; ++k) {
      same = std::max(same, std::abs(a.poses.rotations.at(r * 9 + k) -
                                     b.poses.rotations.at(r * 9 + k)));
      diff += std::abs(a.poses.rotations.at((n_h + r) * 9 + k) -
                       b.poses.rotations.at((n_h + r) * 9 + k));
    }
  CHECK(same == 0.0);  // sample 0 hypotheses untouched
  CHECK(diff > 1e-6);
}

TEST_CASE("texture inference depends on the unprojection but not the shape code") {
  NetworkConfig cfg = NetworkConfig::desk();
  ParamRegistry reg(9);
  TextureInference h_t(reg, "ht", cfg);
  Rng rng(46, "ti");

  GraphScope scope;
  Array q = Array::constant({1, cfg.dim_q}, randn(rng, cfg.dim_q));
  Array v = Array::leaf({1, cfg.dim_v}, randn(rng, cfg.dim_v));
  Array u1 = Array::leaf({1, cfg.dim_u()}, randn(rng, cfg.dim_u()));
  Array xi1 = h_t(q, v, u1, true);
  CHECK(xi1.shape() == Shape{1, cfg.dim_xi_t});

  backward(sum(xi1));
  CHECK(tape().has_grad(u1.node()));
  CHECK_FALSE(tape().has_grad(v.node()));

  // value comparison in eval mode: training-mode normalization of a
  // batch of one collapses to the shift term by construction
  Array u2 = Array::constant({1, cfg.dim_u()}, randn(rng, cfg.dim_u()));
  Array e1 = h_t(q, v.detach(), u1.detach(), false);
  Array e2 = h_t(q, v.detach(), u2, false);
  CHECK(max_abs_diff(e1, e2) > 1e-6);
}

TEST_CASE("conv critic hand-built input gradient matches the recorded graph") {
  NetworkConfig cfg = NetworkConfig::desk();
  ParamRegistry reg(10);
  ConvCritic critic(reg, "ci", 4, cfg);
  perturb_params(reg, 51);
  Rng rng(47, "cgrad");
  int64_t S = cfg.image_size;

  GraphScope scope;
  Array x = Array::leaf({2, 4, S, S}, randn(rng, 2 * 4 * S * S));
  backward(sum(critic.score(x)));
  const std::vector<double>& g_auto = tape().grad_of(x);
  REQUIRE_FALSE(g_auto.empty());

  Array g_hand = critic.input_grad(x.detach());
  REQUIRE(g_hand.shape() == x.shape());
  double worst = 0;
  for (int64_t i = 0; i < g_hand.size(); ++i)
    worst = std::max(worst, std::abs(g_hand.at(i) - g_auto[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("shape critic hand-built input gradient matches the recorded graph") {
  NetworkConfig cfg = NetworkConfig::desk();
  cfg.dim_v = 5;
  cfg.n_vertices = 6;
  cfg.shape_critic_mesh_hidden = 7;
  cfg.dim_y_m = 4;
  cfg.shape_critic_vec_hidden = {6, 5};
  ParamRegistry reg(11);
  ShapeCritic critic(reg, "cs", cfg);
  perturb_params(reg, 52);
  Rng rng(48, "sgrad");
  int64_t W = cfg.dim_v + cfg.n_vertices * 3;

  {  // move the running statistics away from their initialization
    GraphScope scope;
    critic.score(Array::constant({8, W}, randn(rng, 8 * W)), true);
  }

  GraphScope scope;
  Array vm = Array::leaf({3, W}, randn(rng, 3 * W));
  backward(sum(critic.score(vm, false)));
  const std::vector<double>& g_auto = tape().grad_of(vm);
  REQUIRE_FALSE(g_auto.empty());

  Array g_hand = critic.input_grad(vm.detach());
  REQUIRE(g_hand.shape() == vm.shape());
  double worst = 0;
  for (int64_t i = 0; i < g_hand.size(); ++i)
    worst = std::max(worst, std::abs(g_hand.at(i) - g_auto[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("gradient penalty parameter gradients pass finite differences") {
  NetworkConfig cfg = NetworkConfig::desk();
  cfg.critic_base_channels = 2;
  ParamRegistry reg(12);
  ConvCritic critic(reg, "ci", 1, cfg);
  Rng rng(49, "gpfd");
  std::vector<double> rv = randn(rng, 2 * 16 * 16), fv = randn(rng, 2 * 16 * 16);

  auto loss_value = [&]() {
    GraphScope scope;
    Array real = Array::constant({2, 1, 16, 16}, rv);
    Array fake = Array::constant({2, 1, 16, 16}, fv);
    return dist::wgan_critic_loss(critic.view(), real, fake, 10.0, 0.01, 77).item();
  };

  std::vector<std::pair<std::string, std::vector<double>>> grads;
  {
    GraphScope scope;
    Array real = Array::constant({2, 1, 16, 16}, rv);
    Array fake = Array::constant({2, 1, 16, 16}, fv);
    backward(dist::wgan_critic_loss(critic.view(), real, fake, 10.0, 0.01, 77));
    for (Parameter* p : reg.all()) {
      p->zero_grad();
      p->accumulate_from_tape();
      grads.emplace_back(p->name, p->grad);
    }
  }

  Rng probe(49, "gp-probe");
  double h = 1e-5, worst = 0;
  for (auto& [name, grad] : grads) {
    Parameter* p = reg.find(name);
    for (int rep = 0; rep < 4; ++rep) {
      int64_t i = probe.uniform_int(p->size());
      double orig = (*p->value)[i];
      (*p->value)[i] = orig + h;
      double fp = loss_value();
      (*p->value)[i] = orig - h;
      double fm = loss_value();
      (*p->value)[i] = orig;
      double numeric = (fp - fm) / (2 * h);
      double err = std::abs(grad[i] - numeric) /
                   std::max({1.0, std::abs(grad[i]), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("shape critic gradient penalty passes finite differences in eval mode") {
  NetworkConfig cfg = NetworkConfig::desk();
  cfg.dim_v = 5;
  cfg.n_vertices = 6;
  cfg.shape_critic_mesh_hidden = 7;
  cfg.dim_y_m = 4;
  cfg.shape_critic_vec_hidden = {6, 5};
  ParamRegistry reg(13);
  ShapeCritic critic(reg, "cs", cfg);
  perturb_params(reg, 53);
  Rng rng(50, "sfd");
  int64_t W = cfg.dim_v + cfg.n_vertices * 3;
  std::vector<double> rv = randn(rng, 3 * W), fv = randn(rng, 3 * W);

  {  // non-trivial running statistics, then frozen for the whole check
    GraphScope scope;
    critic.score(Array::constant({8, W}, randn(rng, 8 * W)), true);
  }

  auto loss_value = [&]() {
    GraphScope scope;
    Array real = Array::constant({3, W}, rv);
    Array fake = Array::constant({3, W}, fv);
    return dist::wgan_critic_loss(critic.view(false), real, fake, 10.0, 0.01, 78).item();
  };

  std::vector<std::pair<std::string, std::vector<double>>> grads;
  {
    GraphScope scope;
    Array real = Array::constant({3, W}, rv);
    Array fake = Array::constant({3, W}, fv);
    backward(dist::wgan_critic_loss(critic.view(false), real, fake, 10.0, 0.01, 78));
    for (Parameter* p : reg.all()) {
      p->zero_grad();
      p->accumulate_from_tape();
      grads.emplace_back(p->name, p->grad);
    }
  }

  Rng probe(50, "gp-probe");
  double h = 1e-5, worst = 0;
  for (auto& [name, grad] : grads) {
    Parameter* p = reg.find(name);
    for (int rep = 0; rep < 4; ++rep) {
      int64_t i = probe.uniform_int(p->size());
      double orig = (*p->value)[i];
      (*p->value)[i] = orig + h;
      double fp = loss_value();
      (*p->value)[i] = orig - h;
      double fm = loss_value();
      (*p->value)[i] = orig;
      double numeric = (fp - fm) / (2 * h);
      double err = std::abs(grad[i] - numeric) /
                   std::max({1.0, std::abs(grad[i]), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("quaternion rows match the axis-angle construction") {
  Rng rng(51, "quat");
  std::vector<double> qv;
  std::vector<std::array<double, 9>> expect;
  for (int b = 0; b < 6; ++b) {
    std::array<double, 3> axis{rng.normal(), rng.normal(), rng.normal()};
    double angle = rng.uniform(-3.0, 3.0);
    double len = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    double s = std::sin(angle / 2) / len;
    qv.insert(qv.end(), {std::cos(angle / 2), axis[0] * s, axis[1] * s, axis[2] * s});
    expect.push_back(geom::axis_angle_to_matrix(axis, angle));
  }
  GraphScope scope;
  Array R = quaternion_to_matrix_rows(Array::constant({6, 4}, qv));
  check_rotation_rows(R, 1e-12);
  for (int b = 0; b < 6; ++b)
    for (int k = 0; k < 9; ++k)
      CHECK(R.at(b * 9 + k) == doctest::Approx(expect[b][k]).epsilon(1e-12));
}

TEST_CASE("rotation adversary emits proper rotations") {
  NetworkConfig cfg = NetworkConfig::desk();
  ParamRegistry reg(14);
  RotationAdversary a_r(reg, "ar", cfg);
  perturb_params(reg, 54);
  Rng rng(52, "ar");
  int64_t S = cfg.image_size;
  GraphScope scope;
  Array R = a_r(Array::constant({2, 3, S, S}, randn(rng, 2 * 3 * S * S)), false);
  CHECK(R.shape() == Shape{2, 9});
  check_rotation_rows(R);
}

TEST_CASE("every parameter is reachable from a composite loss") {
  NetworkConfig cfg = NetworkConfig::desk();
  ParamRegistry reg(15);
  PointNetEncoder f_v(reg, "fv", cfg);
  OffsetDecoder f_d(reg, "fd", cfg);
  PoseDecoder f_p(reg, "fp", cfg);
  TextureDecoder f_t(reg, "ft", cfg);
  ImageEncoder h_q(reg, "hq", cfg);
  InferenceHeads heads(reg, "heads", cfg);
  TextureInference h_t(reg, "ht", cfg);
  ConvCritic c_i(reg, "ci", 4, cfg);
  ConvCritic c_t(reg, "ct", 3, cfg);
  ShapeCritic c_s(reg, "cs", cfg);
  RotationAdversary a_r(reg, "ar", cfg);
  Rng rng(53, "composite");
  int64_t V = cfg.n_vertices, S = cfg.image_size;
  std::vector<double> uvv(V * 2);
  for (double& u : uvv) u = rng.uniform();

  GraphScope scope;
  Array v = f_v(Array::constant({48, 6}, randn(rng, 48 * 6)), true);
  Array offsets = f_d(v, true);
  PoseBatch pose = f_p(Array::constant({1, 16}, randn(rng, 16)), true);
  TextureOut tex = f_t(Array::constant({1, cfg.dim_xi_t}, randn(rng, cfg.dim_xi_t)), offsets,
                       Array::constant({V, 2}, uvv), true);
  Array rgba = concat_cols({tex.image.reshape({1, 3 * S * S}),
                            Array::full({1, S * S}, 0.8)})
                   .reshape({1, 4, S, S});
  Array q = h_q(rgba, true);
  Hypotheses hyp = heads(q, true);
  Array xi_tt = h_t(q, hyp.v, Array::constant({1, cfg.dim_u()}, randn(rng, cfg.dim_u())), true);

  Array loss = sum(pose.rotations);
  loss = add(loss, sum(pose.translations));
  loss = add(loss, sum(hyp.poses.rotations));
  loss = add(loss, sum(hyp.poses.translations));
  loss = add(loss, sum(mul(hyp.probabilities,
                           Array::constant({1, cfg.n_h}, randn(rng, cfg.n_h)))));
  loss = add(loss, sum(xi_tt));
  loss = add(loss, sum(tex.nodal));
  loss = add(loss, mean(c_i.score(rgba)));
  loss = add(loss, mean(c_t.score(tex.image)));
  loss = add(loss, mean(c_s.score(concat_cols({hyp.v, offsets}), true)));
  loss = add(loss, sum(a_r(tex.image, true)));
  backward(loss);

  std::vector<std::string> dead;
  for (Parameter* p : reg.all())
    if (!p->grad_on_tape()) dead.push_back(p->name);
  std::string first_dead = dead.empty() ? "-" : dead.front();
  CAPTURE(first_dead);
  CHECK(dead.size() == 0);
}

TEST_CASE("checkpoints restore parameters, buffers and optimizer state exactly") {
  auto build = [](ParamRegistry& reg) { return Mlp(reg, "m", 4, {5}, 3, true); };
  std::string path1 = "test_networks_ckpt1.bin", path2 = "test_networks_ckpt2.bin";

  ParamRegistry reg1(21);
  Mlp m1 = build(reg1);
  Adam opt1(reg1.all(), 1e-3, 0.5, 0.99);
  {
    GraphScope scope;
    Rng rng(54, "ckpt");
    backward(sum(m1(Array::constant({6, 4}, rng.normals(24)), true)));
    opt1.collect_grads();
    opt1.step();
  }
  Checkpoint out;
  out.meta["iteration"] = 7;
  store_registry(out, reg1);
  store_adam(out, "gen", opt1);
  save_checkpoint(path1, out);

  ParamRegistry reg2(99);  // different seed: different init to overwrite
  Mlp m2 = build(reg2);
  Adam opt2(reg2.all(), 1e-3, 0.5, 0.99);
  Checkpoint in = load_checkpoint(path1);
  CHECK(in.meta.at("iteration") == 7.0);
  load_registry(in, reg2);
  load_adam(in, "gen", opt2);

  for (Parameter* p : reg1.all()) {
    Parameter* q = reg2.find(p->name);
    REQUIRE(q != nullptr);
    CHECK(*p->value == *q->value);  // bit-exact
  }
  for (auto& [name, buf] : reg1.buffers()) CHECK(*reg2.find_buffer(name) == *buf);
  CHECK(opt2.step_count() == opt1.step_count());
  CHECK(opt2.moment1() == opt1.moment1());
  CHECK(opt2.moment2() == opt1.moment2());

  // identical state serializes to identical bytes
  Checkpoint out2;
  out2.meta["iteration"] = 7;
  store_registry(out2, reg2);
  store_adam(out2, "gen", opt2);
  save_checkpoint(path2, out2);
  auto slurp = [](const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  CHECK(slurp(path1) == slurp(path2));

  // a registry with entries missing from the file refuses to load
  ParamRegistry reg3(5);
  Mlp m3 = build(reg3);
  Linear extra(reg3, "extra", 2, 2);
  CHECK_THROWS_AS(load_registry(in, reg3), std::runtime_error);

  std::remove(path1.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("profiles share interface dimensions") {
  NetworkConfig paper = NetworkConfig::paper(), desk = NetworkConfig::desk();
  CHECK(paper.dim_v == desk.dim_v);
  CHECK(paper.dim_q == desk.dim_q);
  CHECK(paper.dim_xi_p == desk.dim_xi_p);
  CHECK(paper.dim_xi_t == desk.dim_xi_t);
  CHECK(paper.n_h == desk.n_h);
  CHECK(paper.n_vertices == desk.n_vertices);
  CHECK(paper.image_size == desk.image_size);
  CHECK(paper.dim_y_m == desk.dim_y_m);
  CHECK(desk.critic_base_channels < paper.critic_base_channels);
}
