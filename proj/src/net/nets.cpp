#include "cygr/net/nets.hpp"

#include <stdexcept>

#include "cygr/geom/transform.hpp"
#include "cygr/render/texture.hpp"

namespace cygr::net {

using namespace ops;

NetworkConfig NetworkConfig::desk() {
  NetworkConfig c;
  c.pointnet_point_widths = {32, 64, 256};
  c.pointnet_global_widths = {128, 128};
  c.offset_hidden = {128, 192, 256};
  c.mesh_pre_hidden = 256;
  c.dim_z_m = 128;
  c.gen_base_channels = 64;
  c.enc_base_channels = 16;
  c.enc_blocks_per_stage = 1;
  c.critic_base_channels = 8;
  c.gv_hidden = 64;
  c.gu_hidden = 128;
  c.dim_z_u = 96;
  c.gz_hidden = {256, 192};
  c.shape_critic_mesh_hidden = 128;
  c.shape_critic_vec_hidden = {128, 96, 64};
  c.rot_adv_channels = 8;
  return c;
}

PointNetEncoder::PointNetEncoder(ParamRegistry& reg, const std::string& name,
                                 const NetworkConfig& cfg) {
  int64_t cur = 6;
  for (size_t i = 0; i < cfg.pointnet_point_widths.size(); ++i) {
    std::string ln = name + ".p" + std::to_string(i);
    point_layers.emplace_back(reg, ln, cur, cfg.pointnet_point_widths[i]);
    point_bn.emplace_back(reg, ln + ".bn", cfg.pointnet_point_widths[i]);
    cur = cfg.pointnet_point_widths[i];
  }
  for (size_t i = 0; i < cfg.pointnet_global_widths.size(); ++i) {
    std::string ln = name + ".g" + std::to_string(i);
    global_layers.emplace_back(reg, ln, cur, cfg.pointnet_global_widths[i]);
    global_bn.emplace_back(reg, ln + ".bn", cfg.pointnet_global_widths[i]);
    cur = cfg.pointnet_global_widths[i];
  }
  head = Linear(reg, name + ".head", cur, cfg.dim_v);
}

Array PointNetEncoder::operator()(const Array& cloud, bool training) {
  return encode_batch({cloud}, training);
}

Array PointNetEncoder::encode_batch(const std::vector<Array>& clouds, bool training) {
  std::vector<Array> rows;
  for (const Array& cloud : clouds) {
    if (cloud.ndim() != 2 || cloud.dim(1) != 6 || cloud.dim(0) == 0)
      throw std::invalid_argument("shape encoder: need non-empty [N,6] clouds");
    Array h = cloud;
    for (size_t i = 0; i < point_layers.size(); ++i)
      h = elu(point_bn[i](point_layers[i](h), training));
    rows.push_back(max_reduce(h, 0).values.reshape({1, h.dim(1)}));
  }
  Array h = rows.size() == 1 ? rows[0] : concat_rows(rows);
  for (size_t i = 0; i < global_layers.size(); ++i)
    h = elu(global_bn[i](global_layers[i](h), training));
  return head(h);
}

OffsetDecoder::OffsetDecoder(ParamRegistry& reg, const std::string& name,
                             const NetworkConfig& cfg)
    : mlp(reg, name, cfg.dim_v, cfg.offset_hidden, cfg.n_vertices * 3),
      n_vertices(cfg.n_vertices) {}

Array OffsetDecoder::operator()(const Array& v, bool training) { return mlp(v, training); }

PoseBatch pose_from_raw(const Array& raw6, double box_xy, double box_z_lo, double box_z_hi) {
  Array angles = slice_cols(raw6, 0, 3);
  Array tx = scale(tanh(slice_cols(raw6, 3, 4)), box_xy);
  Array ty = scale(tanh(slice_cols(raw6, 4, 5)), box_xy);
  double mid = 0.5 * (box_z_lo + box_z_hi), half = 0.5 * (box_z_hi - box_z_lo);
  Array tz = add_scalar(scale(tanh(slice_cols(raw6, 5, 6)), half), mid);
  PoseBatch out;
  out.angles = angles;
  out.rotations = geom::tait_bryan_rows(angles);
  out.translations = concat_cols({tx, ty, tz});
  return out;
}

PoseDecoder::PoseDecoder(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg)
    : mlp(reg, name, cfg.dim_xi_p, {cfg.pose_hidden}, 6),
      box_xy(cfg.box_xy), box_z_lo(cfg.box_z_lo), box_z_hi(cfg.box_z_hi) {}

PoseBatch PoseDecoder::operator()(const Array& xi_p, bool training) {
  return pose_from_raw(mlp(xi_p, training), box_xy, box_z_lo, box_z_hi);
}

TextureDecoder::TextureDecoder(ParamRegistry& reg, const std::string& name,
                               const NetworkConfig& cfg)
    : mesh_pre(reg, name + ".gm", cfg.n_vertices * 3, {cfg.mesh_pre_hidden}, cfg.dim_z_m),
      base_channels(cfg.gen_base_channels), n_vertices(cfg.n_vertices) {
  stem = Linear(reg, name + ".stem", cfg.dim_xi_t + cfg.dim_z_m, 16 * base_channels);
  for (int k = 0; k < 4; ++k) {
    int64_t in = base_channels >> k, out = base_channels >> (k + 1);
    std::string bn = name + ".b" + std::to_string(k);
    Block blk;
    blk.bn1 = BatchNorm2d(reg, bn + ".bn1", in);
    blk.up = ConvTranspose2dLayer(reg, bn + ".up", in, out, 4, 2, 1);
    blk.bn2 = BatchNorm2d(reg, bn + ".bn2", out);
    blk.conv = Conv2dLayer(reg, bn + ".conv", out, out, 3, 1, 1);
    blk.skip = Conv2dLayer(reg, bn + ".skip", in, out, 1, 1, 0);
    blocks.push_back(blk);
  }
  out_bn = BatchNorm2d(reg, name + ".outbn", base_channels >> 4);
  out_conv = Conv2dLayer(reg, name + ".outconv", base_channels >> 4, 3, 3, 1, 1);
}

TextureOut TextureDecoder::operator()(const Array& xi_t, const Array& mesh, const Array& uv,
                                      bool training) {
  // nodal positions must not carry texture gradients
  Array z_m = mesh_pre(mesh.detach(), training);
  Array h = stem(concat_cols({xi_t, z_m}));
  int64_t B = h.dim(0);
  h = h.reshape({B, base_channels, 4, 4});
  for (Block& blk : blocks) {
    Array r = blk.conv(relu(blk.bn2(blk.up(relu(blk.bn1(h, training))), training)));
    Array s = blk.skip(upsample2_nearest(h));
    h = add(r, s);
  }
  TextureOut out;
  out.image = tanh(out_conv(relu(out_bn(h, training))));
  int64_t S = out.image.dim(2);
  Array flat = out.image.reshape({B, 3 * S * S});
  std::vector<Array> rows;
  for (int64_t b = 0; b < B; ++b) {
    Array tex = slice_rows(flat, b, b + 1).reshape({3, S, S});
    Array nodal = render::to_unit_range(render::uv_sample(tex, uv));
    rows.push_back(nodal.reshape({1, n_vertices * 3}));
  }
  out.nodal = rows.size() == 1 ? rows[0] : concat_rows(rows);
  return out;
}

ImageEncoder::ImageEncoder(ParamRegistry& reg, const std::string& name,
                           const NetworkConfig& cfg) {
  int64_t base = cfg.enc_base_channels;
  stem = Conv2dLayer(reg, name + ".stem", 4, base, 3, 2, 1);
  stem_bn = BatchNorm2d(reg, name + ".stembn", base);
  int64_t cur = base;
  for (int stage = 0; stage < 4; ++stage) {
    int64_t width = base << stage;
    for (int b = 0; b < cfg.enc_blocks_per_stage; ++b) {
      bool down = stage > 0 && b == 0;
      std::string bn = name + ".s" + std::to_string(stage) + "b" + std::to_string(b);
      Block blk;
      blk.conv1 = Conv2dLayer(reg, bn + ".c1", cur, width, 3, down ? 2 : 1, 1);
      blk.bn1 = BatchNorm2d(reg, bn + ".bn1", width);
      blk.conv2 = Conv2dLayer(reg, bn + ".c2", width, width, 3, 1, 1);
      blk.bn2 = BatchNorm2d(reg, bn + ".bn2", width);
      blk.has_skip = down || cur != width;
      if (blk.has_skip) blk.skip = Conv2dLayer(reg, bn + ".skip", cur, width, 1, down ? 2 : 1, 0);
      blocks.push_back(blk);
      cur = width;
    }
  }
  head = Linear(reg, name + ".head", cur, cfg.dim_q);
}

Array ImageEncoder::operator()(const Array& image, bool training) {
  if (image.ndim() != 4 || image.dim(1) != 4)
    throw std::invalid_argument("image encoder: need [B,4,S,S] input");
  Array h = relu(stem_bn(stem(image), training));
  for (Block& blk : blocks) {
    Array r = blk.bn2(blk.conv2(relu(blk.bn1(blk.conv1(h), training))), training);
    Array s = blk.has_skip ? blk.skip(h) : h;
    h = relu(add(r, s));
  }
  Array feat = mean_axes(h, {2, 3}).reshape({h.dim(0), h.dim(1)});
  return head(feat);
}

InferenceHeads::InferenceHeads(ParamRegistry& reg, const std::string& name,
                               const NetworkConfig& cfg)
    : shape_head(reg, name + ".hv", cfg.dim_q, cfg.dim_v),
      pose_mlp(reg, name + ".hp", cfg.dim_q, {static_cast<int64_t>(12 * cfg.n_h)}, 6 * cfg.n_h),
      prob_mlp(reg, name + ".he", cfg.dim_q, {static_cast<int64_t>(32 * cfg.n_h)}, cfg.n_h),
      n_h(cfg.n_h), box_xy(cfg.box_xy), box_z_lo(cfg.box_z_lo), box_z_hi(cfg.box_z_hi) {}

Hypotheses InferenceHeads::operator()(const Array& q, bool training) {
  Hypotheses out;
  out.v = shape_head(q);
  Array raw = pose_mlp(q, training).reshape({q.dim(0) * n_h, 6});
  out.poses = pose_from_raw(raw, box_xy, box_z_lo, box_z_hi);
  out.probabilities = softmax_rows(prob_mlp(q, training));
  return out;
}

TextureInference::TextureInference(ParamRegistry& reg, const std::string& name,
                                   const NetworkConfig& cfg)
    : g_v(reg, name + ".gv", cfg.dim_v, {cfg.gv_hidden}, cfg.dim_z_v, true),
      g_u(reg, name + ".gu", cfg.dim_u(), {cfg.gu_hidden}, cfg.dim_z_u, true),
      g_z(reg, name + ".gz", cfg.dim_z(),
          cfg.gz_hidden.empty()
              ? std::vector<int64_t>{3 * cfg.dim_z(), 2 * cfg.dim_z()}
              : cfg.gz_hidden,
          cfg.dim_xi_t) {}

Array TextureInference::operator()(const Array& q, const Array& v, const Array& u,
                                   bool training) {
  // the latent shape path must not receive texture gradients
  Array z_v = g_v(v.detach(), training);
  Array z_u = g_u(u, training);
  return g_z(concat_cols({q, z_v, z_u}), training);
}

ConvCritic::ConvCritic(ParamRegistry& reg, const std::string& name, int64_t in_ch,
                       const NetworkConfig& cfg)
    : in_channels(in_ch) {
  int64_t base = cfg.critic_base_channels;
  {
    Block blk;  // initial block, no downsampling
    blk.conv1 = Conv2dLayer(reg, name + ".b0.c1", in_ch, base, 3, 1, 1);
    blk.conv2 = Conv2dLayer(reg, name + ".b0.c2", base, base, 3, 1, 1);
    blk.skip = Conv2dLayer(reg, name + ".b0.skip", in_ch, base, 1, 1, 0);
    blocks.push_back(blk);
  }
  for (int k = 1; k <= 4; ++k) {
    int64_t in = base << (k - 1), out = base << k;
    std::string bn = name + ".b" + std::to_string(k);
    Block blk;
    blk.conv1 = Conv2dLayer(reg, bn + ".c1", in, out, 3, 1, 1);
    blk.conv2 = Conv2dLayer(reg, bn + ".c2", out, out, 3, 1, 1);
    blk.skip = Conv2dLayer(reg, bn + ".skip", in, out, 1, 1, 0);
    blk.downsample = true;
    blocks.push_back(blk);
  }
  head = Linear(reg, name + ".head", base << 4, 1);
}

Array ConvCritic::forward(const Array& x, std::vector<Array>* relu_in,
                          std::vector<Array>* block_in) {
  Array h = x;
  for (Block& blk : blocks) {
    if (block_in) block_in->push_back(h);
    Array t;
    if (!blk.downsample) {
      t = blk.conv1(h);
      if (relu_in) relu_in->push_back(t);
      t = blk.conv2(relu(t));
      h = add(t, blk.skip(h));
    } else {
      if (relu_in) relu_in->push_back(h);
      t = blk.conv1(relu(h));
      if (relu_in) relu_in->push_back(t);
      t = avgpool2(blk.conv2(relu(t)));
      h = add(t, avgpool2(blk.skip(h)));
    }
  }
  if (relu_in) relu_in->push_back(h);
  Array f = relu(h);
  Array feat = mean_axes(f, {2, 3}).reshape({f.dim(0), f.dim(1)});
  return head(feat);
}

Array ConvCritic::score(const Array& x) { return forward(x, nullptr, nullptr); }

std::vector<Array> ConvCritic::features(const Array& x) {
  std::vector<Array> out;
  Array h = x;
  for (Block& blk : blocks) {
    if (!blk.downsample) {
      Array t = blk.conv2(relu(blk.conv1(h)));
      h = add(t, blk.skip(h));
    } else {
      Array t = avgpool2(blk.conv2(relu(blk.conv1(relu(h)))));
      h = add(t, avgpool2(blk.skip(h)));
    }
    out.push_back(h);
  }
  return out;
}

namespace {

Array relu_mask(const Array& z) {
  std::vector<double> m(z.size());
  const std::vector<double>& v = z.data();
  for (int64_t i = 0; i < z.size(); ++i) m[i] = v[i] > 0 ? 1.0 : 0.0;
  return Array::constant(z.shape(), m);
}

}  // namespace

Array ConvCritic::input_grad(const Array& x) {
  std::vector<Array> relu_in;
  forward(x, &relu_in, nullptr);
  size_t ri = relu_in.size();

  int64_t B = x.dim(0);
  const Array& final_pre = relu_in[--ri];
  int64_t C = final_pre.dim(1), H = final_pre.dim(2), W = final_pre.dim(3);

  // d(score)/d(pooled features), spread back over the spatial mean
  Array g = matmul(Array::constant({B, 1}, std::vector<double>(B, 1.0)),
                   transpose(head.weight->use()));
  g = mul(g.reshape({B, C, 1, 1}),
          Array::constant({1, 1, H, W},
                          std::vector<double>(H * W, 1.0 / static_cast<double>(H * W))));
  g = mul(g, relu_mask(final_pre));

  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
    Block& blk = *it;
    if (blk.downsample) {
      Array gp = scale(upsample2_nearest(g), 0.25);  // avgpool adjoint
      Array gm = conv2d_transpose(gp, blk.conv2.weight->use(), 1, 1);
      gm = mul(gm, relu_mask(relu_in[--ri]));
      gm = conv2d_transpose(gm, blk.conv1.weight->use(), 1, 1);
      gm = mul(gm, relu_mask(relu_in[--ri]));
      Array gs = conv2d_transpose(gp, blk.skip.weight->use(), 1, 0);
      g = add(gm, gs);
    } else {
      Array gm = conv2d_transpose(g, blk.conv2.weight->use(), 1, 1);
      gm = mul(gm, relu_mask(relu_in[--ri]));
      gm = conv2d_transpose(gm, blk.conv1.weight->use(), 1, 1);
      Array gs = conv2d_transpose(g, blk.skip.weight->use(), 1, 0);
      g = add(gm, gs);
    }
  }
  return g;
}

dist::CriticView ConvCritic::view() {
  dist::CriticView cv;
  cv.value = [this](const Array& x) { return score(x); };
  cv.grad_norm = [this](const Array& x) { return rows_norm(input_grad(x)); };
  return cv;
}

ShapeCritic::ShapeCritic(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg)
    : mesh_branch(reg, name + ".mesh", cfg.n_vertices * 3, {cfg.shape_critic_mesh_hidden},
                  cfg.dim_y_m, true),
      vec_critic(reg, name + ".vec", cfg.dim_v + cfg.dim_y_m, cfg.shape_critic_vec_hidden, 1),
      dim_v(cfg.dim_v), mesh_dim(cfg.n_vertices * 3) {}

Array ShapeCritic::score(const Array& vm, bool training) {
  if (vm.ndim() != 2 || vm.dim(1) != dim_v + mesh_dim)
    throw std::invalid_argument("shape critic: bad input width");
  Array v = slice_cols(vm, 0, dim_v);
  Array m = slice_cols(vm, dim_v, dim_v + mesh_dim);
  Array ym = mesh_branch(m, training);
  return vec_critic(concat_cols({v, ym}), training);
}

Array ShapeCritic::mlp_forward(Mlp& mlp, const Array& x, bool training,
                               std::vector<Array>* pre_elu) {
  Array h = x;
  for (size_t i = 0; i < mlp.hidden.size(); ++i) {
    Array z = mlp.hidden_bn[i](mlp.hidden[i](h), training);
    if (pre_elu) pre_elu->push_back(z);
    h = elu(z);
  }
  h = mlp.out(h);
  if (mlp.trailing_ba) {
    Array z = mlp.out_bn(h, training);
    if (pre_elu) pre_elu->push_back(z);
    h = elu(z);
  }
  return h;
}

Array ShapeCritic::mlp_adjoint(Mlp& mlp, const Array& g_out, const std::vector<Array>& pre_elu) {
  size_t ri = pre_elu.size();
  Array g = g_out;
  if (mlp.trailing_ba) {
    g = mul(g, elu_gradient(pre_elu[--ri]));
    g = mul(g, mlp.out_bn.eval_slope());
  }
  g = matmul(g, transpose(mlp.out.weight->use()));
  for (size_t i = mlp.hidden.size(); i-- > 0;) {
    g = mul(g, elu_gradient(pre_elu[--ri]));
    g = mul(g, mlp.hidden_bn[i].eval_slope());
    g = matmul(g, transpose(mlp.hidden[i].weight->use()));
  }
  return g;
}

Array ShapeCritic::input_grad(const Array& vm) {
  Array v = slice_cols(vm, 0, dim_v);
  Array m = slice_cols(vm, dim_v, dim_v + mesh_dim);
  std::vector<Array> mesh_pre, vec_pre;
  Array ym = mlp_forward(mesh_branch, m, false, &mesh_pre);
  mlp_forward(vec_critic, concat_cols({v, ym}), false, &vec_pre);

  int64_t B = vm.dim(0);
  Array ones = Array::constant({B, 1}, std::vector<double>(B, 1.0));
  Array g = mlp_adjoint(vec_critic, ones, vec_pre);
  Array gv = slice_cols(g, 0, dim_v);
  Array gym = slice_cols(g, dim_v, dim_v + mesh_branch.out.out_dim());
  Array gm = mlp_adjoint(mesh_branch, gym, mesh_pre);
  return concat_cols({gv, gm});
}

dist::CriticView ShapeCritic::view(bool training) {
  dist::CriticView cv;
  cv.value = [this, training](const Array& x) { return score(x, training); };
  cv.grad_norm = [this](const Array& x) { return rows_norm(input_grad(x)); };
  return cv;
}

RotationAdversary::RotationAdversary(ParamRegistry& reg, const std::string& name,
                                     const NetworkConfig& cfg) {
  int64_t c = cfg.rot_adv_channels;
  stem = Conv2dLayer(reg, name + ".stem", 3, c, 3, 2, 1);
  stem_bn = BatchNorm2d(reg, name + ".stembn", c);
  for (int k = 0; k < 2; ++k) {
    int64_t in = c << k, out = c << (k + 1);
    std::string bn = name + ".b" + std::to_string(k);
    Block blk;
    blk.conv1 = Conv2dLayer(reg, bn + ".c1", in, out, 3, 2, 1);
    blk.bn1 = BatchNorm2d(reg, bn + ".bn1", out);
    blk.conv2 = Conv2dLayer(reg, bn + ".c2", out, out, 3, 1, 1);
    blk.bn2 = BatchNorm2d(reg, bn + ".bn2", out);
    blk.skip = Conv2dLayer(reg, bn + ".skip", in, out, 1, 2, 0);
    blocks.push_back(blk);
  }
  head = Linear(reg, name + ".head", c << 2, 4);
}

Array RotationAdversary::operator()(const Array& image, bool training) {
  Array h = relu(stem_bn(stem(image), training));
  for (Block& blk : blocks) {
    Array r = blk.bn2(blk.conv2(relu(blk.bn1(blk.conv1(h), training))), training);
    h = relu(add(r, blk.skip(h)));
  }
  Array feat = mean_axes(h, {2, 3}).reshape({h.dim(0), h.dim(1)});
  Array q = head(feat);
  Array qn = div(q, rows_norm(q).reshape({q.dim(0), 1}));
  return quaternion_to_matrix_rows(qn);
}

Array quaternion_to_matrix_rows(const Array& q) {
  if (q.ndim() != 2 || q.dim(1) != 4)
    throw std::invalid_argument("quaternion rows: need [B,4]");
  Array w = slice_cols(q, 0, 1), x = slice_cols(q, 1, 2);
  Array y = slice_cols(q, 2, 3), z = slice_cols(q, 3, 4);
  // row-vector convention, matching axis_angle_to_matrix
  auto two = [](const Array& a) { return scale(a, 2.0); };
  Array m00 = add_scalar(neg(two(add(square(y), square(z)))), 1.0);
  Array m01 = two(add(mul(x, y), mul(w, z)));
  Array m02 = two(sub(mul(x, z), mul(w, y)));
  Array m10 = two(sub(mul(x, y), mul(w, z)));
  Array m11 = add_scalar(neg(two(add(square(x), square(z)))), 1.0);
  Array m12 = two(add(mul(y, z), mul(w, x)));
  Array m20 = two(add(mul(x, z), mul(w, y)));
  Array m21 = two(sub(mul(y, z), mul(w, x)));
  Array m22 = add_scalar(neg(two(add(square(x), square(y)))), 1.0);
  return concat_cols({m00, m01, m02, m10, m11, m12, m20, m21, m22});
}

}  // namespace cygr::net
