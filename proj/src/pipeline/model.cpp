#include "cygr/pipeline/model.hpp"

#include <cmath>
#include <stdexcept>

#include "cygr/geom/transform.hpp"
#include "cygr/render/texture.hpp"

namespace cygr::pipeline {

using namespace ops;

namespace {

Array stack_rows(const std::vector<Array>& items) {
  std::vector<Array> rows;
  rows.reserve(items.size());
  for (const Array& a : items) rows.push_back(a.reshape({1, numel(a.shape())}));
  return concat_rows(rows);
}

}  // namespace

Array stack_image_batch(const std::vector<Array>& images) {
  int64_t c = images.at(0).dim(0), h = images[0].dim(1), w = images[0].dim(2);
  return stack_rows(images).reshape({static_cast<int64_t>(images.size()), c, h, w});
}

Model::Model(const TrainConfig& cfg, uint64_t seed)
    : Model(cfg, seed,
            geom::build_template(geom::make_sphere(0.5, cfg.sphere_segments, cfg.sphere_rings))) {}

Model::Model(const TrainConfig& cfg, uint64_t seed, geom::TemplateMesh t)
    : reg(seed),
      tpl(std::move(t)),
      net_cfg(cfg.net),
      camera(cfg.camera),
      raster(cfg.raster),
      n_surface_samples(cfg.n_surface_samples),
      f_v(reg, "fv", cfg.net),
      f_delta(reg, "fd", cfg.net),
      f_p(reg, "fp", cfg.net),
      f_t(reg, "ft", cfg.net),
      h_q(reg, "hq", cfg.net),
      heads(reg, "hh", cfg.net),
      h_t(reg, "ht", cfg.net),
      c_image(reg, "ci", 4, cfg.net),
      c_texture(reg, "ct", 3, cfg.net),
      c_shape(reg, "cs", cfg.net),
      a_rot(reg, "ar", cfg.net) {
  if (tpl.n_vertices() != net_cfg.n_vertices)
    throw std::invalid_argument("model: template has " + std::to_string(tpl.n_vertices()) +
                                " vertices, network profile expects " +
                                std::to_string(net_cfg.n_vertices));
  tpl_row_ = tpl.vertices_const.reshape({1, net_cfg.n_vertices * 3});
}

std::vector<Parameter*> Model::generator_params() {
  std::vector<Parameter*> out;
  for (Parameter* p : reg.all()) {
    const std::string& n = p->name;
    bool critic = n.rfind("ci.", 0) == 0 || n.rfind("ct.", 0) == 0 || n.rfind("cs.", 0) == 0 ||
                  n.rfind("ar.", 0) == 0;
    if (!critic) out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> Model::critic_params(const std::string& prefix) {
  return reg.with_prefix(prefix);
}

Model::ShapeFit Model::fit_shapes(const std::vector<Array>& clouds, bool training) {
  ShapeFit fit;
  fit.v = f_v.encode_batch(clouds, training);
  fit.delta = f_delta(fit.v, training);
  for (size_t b = 0; b < clouds.size(); ++b) {
    Array row = slice_rows(fit.delta, b, b + 1).reshape({net_cfg.n_vertices, 3});
    fit.meshes.push_back(add(tpl.vertices_const, row));
  }
  return fit;
}

Array Model::scene_mesh(const Array& mesh, const Array& rot_row, const Array& trans_row) const {
  return geom::apply_transform(mesh, rot_row.detach().reshape({3, 3}), trans_row.detach());
}

Model::RenderPass Model::render_shapes(const ShapeFit& fit, const net::PoseBatch& pose,
                                       const Array& xi_t, bool training) {
  Array mesh_flat = add(fit.delta, tpl_row_);
  net::TextureOut tex = f_t(xi_t, mesh_flat, tpl.uv_const, training);
  return render_with_texture(fit, pose, tex);
}

Model::RenderPass Model::render_shapes_nodal(const ShapeFit& fit, const net::PoseBatch& pose,
                                             const Array& nodal, bool training) {
  (void)training;
  net::TextureOut tex;
  tex.nodal = nodal;
  return render_with_texture(fit, pose, tex);
}

Model::RenderPass Model::render_with_texture(const ShapeFit& fit, const net::PoseBatch& pose,
                                             net::TextureOut tex) {
  RenderPass pass;
  pass.pose = pose;
  pass.tex = std::move(tex);
  int64_t b_count = static_cast<int64_t>(fit.meshes.size());
  for (int64_t b = 0; b < b_count; ++b) {
    Array scene = scene_mesh(fit.meshes[b], slice_rows(pose.rotations, b, b + 1),
                             slice_rows(pose.translations, b, b + 1));
    Array colors = slice_rows(pass.tex.nodal, b, b + 1).reshape({net_cfg.n_vertices, 3});
    pass.scene.push_back(scene);
    pass.renders.push_back(render::render_mesh(scene, colors, tpl.mesh.faces, camera, raster));
  }
  return pass;
}

Array Model::Inference::best_rows(const Array& grouped) const {
  int64_t n_h = probabilities.dim(1);
  std::vector<int64_t> idx(best.size());
  for (size_t b = 0; b < best.size(); ++b) idx[b] = static_cast<int64_t>(b) * n_h + best[b];
  return gather_rows(grouped, idx);
}

Array Model::Inference::best_xi() const {
  std::vector<Array> rows;
  rows.reserve(best.size());
  for (size_t b = 0; b < best.size(); ++b)
    rows.push_back(slice_rows(xi[best[b]], static_cast<int64_t>(b), static_cast<int64_t>(b) + 1));
  return concat_rows(rows);
}

Model::Inference Model::image_to_shape(const std::vector<Array>& images, bool training) {
  Inference inf;
  int64_t b_count = static_cast<int64_t>(images.size());
  int n_h = net_cfg.n_h;
  Array batch = stack_image_batch(images);
  inf.q = h_q(batch, training);
  net::Hypotheses hyp = heads(inf.q, training);
  inf.v = hyp.v;
  inf.poses = hyp.poses;
  inf.probabilities = hyp.probabilities;
  inf.delta = f_delta(inf.v, training);
  for (int64_t b = 0; b < b_count; ++b) {
    Array row = slice_rows(inf.delta, b, b + 1).reshape({net_cfg.n_vertices, 3});
    inf.meshes.push_back(add(tpl.vertices_const, row));
  }
  // best hypothesis: argmax probability, ties to the lowest index
  const std::vector<double>& p = inf.probabilities.data();
  for (int64_t b = 0; b < b_count; ++b) {
    int arg = 0;
    for (int i = 1; i < n_h; ++i)
      if (p[b * n_h + i] > p[b * n_h + arg]) arg = i;
    inf.best.push_back(arg);
  }
  inf.scene_meshes.resize(b_count);
  for (int64_t b = 0; b < b_count; ++b)
    for (int i = 0; i < n_h; ++i) {
      int64_t r = b * n_h + i;
      inf.scene_meshes[b].push_back(scene_mesh(inf.meshes[b],
                                               slice_rows(inf.poses.rotations, r, r + 1),
                                               slice_rows(inf.poses.translations, r, r + 1)));
    }
  std::vector<Array> unprojections = stack_unprojections(images, inf);
  for (int i = 0; i < n_h; ++i) inf.xi.push_back(h_t(inf.q, inf.v, unprojections[i], training));
  return inf;
}

std::vector<Array> Model::stack_unprojections(const std::vector<Array>& images,
                                              const Inference& inf) const {
  int64_t b_count = static_cast<int64_t>(images.size());
  std::vector<Array> out;
  for (int i = 0; i < net_cfg.n_h; ++i) {
    std::vector<Array> rows;
    for (int64_t b = 0; b < b_count; ++b) {
      Array u = render::unproject(images[b], inf.scene_meshes[b][i], camera);
      rows.push_back(u.reshape({1, net_cfg.dim_u()}));
    }
    out.push_back(concat_rows(rows));
  }
  return out;
}

Model::GraphicsOutput Model::shape_to_image(const std::vector<Array>& clouds, const Array& xi_t,
                                            const Array& xi_p, bool training) {
  GraphicsOutput out;
  out.fit = fit_shapes(clouds, training);
  net::PoseBatch pose = f_p(xi_p, training);
  out.pass = render_shapes(out.fit, pose, xi_t, training);
  return out;
}

Model::VisionForward Model::vision_forward(const std::vector<Array>& images, bool training) {
  VisionForward vf;
  vf.inf = image_to_shape(images, training);
  Array mesh_flat = add(vf.inf.delta, tpl_row_);
  int64_t b_count = static_cast<int64_t>(images.size());
  for (int i = 0; i < net_cfg.n_h; ++i) {
    vf.tex.push_back(f_t(vf.inf.xi[i], mesh_flat, tpl.uv_const, training));
    std::vector<Array> renders;
    for (int64_t b = 0; b < b_count; ++b) {
      Array colors =
          slice_rows(vf.tex[i].nodal, b, b + 1).reshape({net_cfg.n_vertices, 3});
      renders.push_back(
          render::render_mesh(vf.inf.scene_meshes[b][i], colors, tpl.mesh.faces, camera, raster));
    }
    vf.renders.push_back(std::move(renders));
  }
  return vf;
}

Array TermList::total() const {
  if (terms.empty()) return Array::scalar(0.0);
  Array acc = terms[0].second;
  for (size_t i = 1; i < terms.size(); ++i) acc = ops::add(acc, terms[i].second);
  return acc;
}

namespace {

Array batch_mean(const std::vector<Array>& scalars) {
  Array acc = scalars.at(0);
  for (size_t i = 1; i < scalars.size(); ++i) acc = add(acc, scalars[i]);
  return scale(acc, 1.0 / static_cast<double>(scalars.size()));
}

// mean over rows of the row-wise L1 distance
Array mean_row_l1(const Array& a, const Array& b) { return mean(sum_axes(abs(sub(a, b)), {1})); }
// mean over rows of the row-wise squared L2 distance
Array mean_row_sq(const Array& a, const Array& b) {
  return mean(sum_axes(square(sub(a, b)), {1}));
}

Array hypothesis_rows(const Array& grouped, int64_t b_count, int n_h, int i) {
  std::vector<int64_t> idx(b_count);
  for (int64_t b = 0; b < b_count; ++b) idx[b] = b * n_h + i;
  return gather_rows(grouped, idx);
}

}  // namespace

TermList shape_fit_losses(Model& m, const LossWeights& w, const std::vector<Array>& clouds,
                          const Model::ShapeFit& fit, Rng& rng) {
  TermList out;
  if (w.g_chamfer <= 0.0 && w.g_normals <= 0.0) return out;
  std::vector<Array> ch, nm;
  for (size_t b = 0; b < clouds.size(); ++b) {
    geom::SampledSurface ss =
        geom::sample_surface_tape(fit.meshes[b], m.tpl.mesh.faces, m.n_surface_samples, rng);
    Array x = slice_cols(clouds[b], 0, 3);
    Array nx = slice_cols(clouds[b], 3, 6);
    if (w.g_chamfer > 0.0) {
      // positions matched on the samples and the vertices, so every template
      // vertex receives a signal
      Array xm = concat_rows({ss.points, fit.meshes[b]});
      ch.push_back(geom::chamfer(xm, x));
    }
    if (w.g_normals > 0.0) nm.push_back(geom::normals_match(x, nx, ss.points, ss.normals));
  }
  if (!ch.empty()) out.add("fit_chamfer", scale(batch_mean(ch), w.g_chamfer));
  if (!nm.empty()) out.add("fit_normals", scale(batch_mean(nm), -w.g_normals));
  return out;
}

TermList graphics_cycle_losses(Model& m, const LossWeights& w, const Model::ShapeFit& fit,
                               const Model::RenderPass& pass, const std::optional<Array>& xi_t,
                               const std::optional<Array>& dr_nodal,
                               const Model::Inference& second, const std::string& prefix,
                               double scale_factor, bool training) {
  TermList out;
  int64_t b_count = static_cast<int64_t>(fit.meshes.size());
  int n_h = m.net_cfg.n_h;
  if (w.g_v > 0.0)
    out.add(prefix + "_v",
            scale(mean_row_l1(fit.v, second.v),
                  scale_factor * w.g_v / static_cast<double>(m.net_cfg.dim_v)));
  if (w.g_mesh > 0.0)
    out.add(prefix + "_mesh",
            scale(mean_row_sq(fit.delta, second.delta),
                  scale_factor * w.g_mesh / static_cast<double>(m.net_cfg.n_vertices)));
  if (w.g_trans > 0.0) {
    Array t_hat = second.best_rows(second.poses.translations);
    out.add(prefix + "_trans",
            scale(mean_row_sq(pass.pose.translations, t_hat), scale_factor * w.g_trans / 3.0));
  }
  if (w.g_rot > 0.0) {
    Array acc;
    for (int i = 0; i < n_h; ++i) {
      Array r_hat = hypothesis_rows(second.poses.rotations, b_count, n_h, i);
      Array d = geom::geodesic_rows(pass.pose.rotations, r_hat);
      Array weighted = mul(d, slice_cols(second.probabilities, i, i + 1));
      acc = i == 0 ? weighted : add(acc, weighted);
    }
    out.add(prefix + "_rot", scale(mean(acc), scale_factor * w.g_rot / M_PI));
  }
  if (xi_t && w.g_xi > 0.0)
    out.add(prefix + "_xi",
            scale(mean_row_sq(*xi_t, second.best_xi()),
                  scale_factor * w.g_xi / static_cast<double>(m.net_cfg.dim_xi_t)));
  if (dr_nodal && w.g_xi > 0.0) {
    Array mesh_flat = add(second.delta, m.template_row());
    net::TextureOut decoded = m.f_t(second.best_xi(), mesh_flat, m.tpl.uv_const, training);
    out.add(prefix + "_tex",
            scale(mean_row_l1(*dr_nodal, decoded.nodal),
                  scale_factor * w.g_xi / (3.0 * static_cast<double>(m.net_cfg.n_vertices))));
  }
  if (xi_t && w.g_tex_nodal > 0.0) {
    Array mesh_flat = add(second.delta, m.template_row());
    Array acc;
    for (int i = 0; i < n_h; ++i) {
      net::TextureOut decoded = m.f_t(second.xi[i], mesh_flat, m.tpl.uv_const, training);
      Array l1 = sum_axes(abs(sub(pass.tex.nodal, decoded.nodal)), {1});
      acc = i == 0 ? l1 : add(acc, l1);
    }
    out.add(prefix + "_tr",
            scale(mean(acc),
                  scale_factor * w.g_tex_nodal /
                      (3.0 * static_cast<double>(n_h) * static_cast<double>(m.net_cfg.n_vertices))));
  }
  return out;
}

TermList graphics_distribution_losses(Model& m, const LossWeights& w, const TrainConfig& tc,
                                      const Model::RenderPass& pass,
                                      const dist::PoseBuffer& buffer, double scale_factor,
                                      uint64_t iter) {
  (void)iter;
  TermList out;
  if (w.g_image > 0.0)
    out.add("dg_image",
            scale(mean(m.c_image.score(stack_image_batch(pass.renders))), -scale_factor * w.g_image));
  if (w.g_texture > 0.0 && pass.tex.image.size() > 0)
    out.add("dg_texture", scale(mean(m.c_texture.score(pass.tex.image)), -scale_factor * w.g_texture));
  if (w.g_pose > 0.0 && buffer.size() > 0) {
    out.add("dg_pose_rot",
            scale(dist::sinkhorn(buffer.rotations(), pass.pose.rotations,
                                 dist::Ground::kGeodesicSO3, tc.sinkhorn_eps),
                  scale_factor * w.g_pose));
    out.add("dg_pose_trans",
            scale(dist::sinkhorn(buffer.translations(), pass.pose.translations,
                                 dist::Ground::kSquaredL2, tc.sinkhorn_eps),
                  scale_factor * w.g_pose));
  }
  return out;
}

TermList vision_cycle_losses(Model& m, const LossWeights& w, const TrainConfig& tc,
                             const std::vector<Array>& images, const Model::VisionForward& vf,
                             uint64_t iter) {
  TermList out;
  int64_t b_count = static_cast<int64_t>(images.size());
  int n_h = m.net_cfg.n_h;
  Array input_batch = stack_image_batch(images);
  double n_pixels = static_cast<double>(m.net_cfg.image_size) * m.net_cfg.image_size;

  bool want_pixel = w.v_pixel > 0.0, want_percep = w.v_percep > 0.0;
  std::vector<Array> input_feats;
  if (want_percep) input_feats = m.c_image.features(input_batch);
  Array pixel_acc, percep_acc;
  for (int i = 0; i < n_h && (want_pixel || want_percep); ++i) {
    Array recon_batch = stack_image_batch(vf.renders[i]);
    Array p_col = slice_cols(vf.inf.probabilities, i, i + 1);
    if (want_pixel) {
      Array l1 = sum_axes(abs(sub(input_batch, recon_batch)), {1, 2, 3}).reshape({b_count, 1});
      Array weighted = mul(l1, p_col);
      pixel_acc = i == 0 ? weighted : add(pixel_acc, weighted);
    }
    if (want_percep) {
      std::vector<Array> recon_feats = m.c_image.features(recon_batch);
      Array block_acc;
      for (size_t j = 0; j < input_feats.size(); ++j) {
        const Array& f = input_feats[j];
        double denom = static_cast<double>(f.dim(1)) * f.dim(2) * f.dim(3);
        Array l1 =
            sum_axes(abs(sub(f, recon_feats[j])), {1, 2, 3}).reshape({b_count, 1});
        Array scaled = scale(l1, 1.0 / denom);
        block_acc = j == 0 ? scaled : add(block_acc, scaled);
      }
      Array weighted = mul(scale(block_acc, 1.0 / static_cast<double>(input_feats.size())), p_col);
      percep_acc = i == 0 ? weighted : add(percep_acc, weighted);
    }
  }
  if (want_pixel) out.add("vc_pixel", scale(mean(pixel_acc), w.v_pixel / (4.0 * n_pixels)));
  if (want_percep) out.add("vc_percep", scale(mean(percep_acc), w.v_percep));

  if (w.v_shape > 0.0) {
    Array mesh_flat = add(vf.inf.delta, m.template_row());
    Array vm = concat_cols({vf.inf.v, mesh_flat});
    out.add("dv_shape", scale(mean(m.c_shape.score(vm, false)), -w.v_shape));
  }
  if (w.v_xi > 0.0) {
    Rng prior_rng(tc.seed, "xi-prior", iter);
    Array prior = Array::constant({b_count, m.net_cfg.dim_xi_t},
                                  prior_rng.normals(b_count * m.net_cfg.dim_xi_t));
    uint64_t swd_seed = Rng(tc.seed, "swd-xi", iter).next_u64();
    out.add("dv_xi_swd", scale(dist::sliced_wasserstein(vf.inf.best_xi(), prior,
                                                        tc.swd_projections, swd_seed),
                               w.v_xi));
  }
  return out;
}

TermList regularization_losses(Model& m, const LossWeights& w, const TrainConfig& tc,
                               const Model::ShapeFit& fit, const Model::VisionForward* vf,
                               uint64_t iter) {
  TermList out;
  int64_t b_count = static_cast<int64_t>(fit.meshes.size());
  int n_h = m.net_cfg.n_h;

  auto mesh_term = [&](const std::vector<Array>& meshes) {
    std::vector<Array> vals;
    for (const Array& mesh : meshes) {
      geom::MeshRegularizers r = geom::mesh_regularizers(mesh, m.tpl);
      vals.push_back(add(add(scale(r.edge, w.mesh_edge), scale(r.laplacian, w.mesh_laplacian)),
                         scale(r.flatness, w.mesh_flatness)));
    }
    return batch_mean(vals);
  };
  auto offset_term = [&](const Array& delta) {
    std::vector<Array> vals;
    for (int64_t b = 0; b < delta.dim(0); ++b) {
      Array d = slice_rows(delta, b, b + 1).reshape({m.net_cfg.n_vertices, 3});
      vals.push_back(geom::offset_variance(d, m.tpl.mesh.faces));
    }
    return batch_mean(vals);
  };

  if (w.r_mesh > 0.0) {
    Array term = mesh_term(fit.meshes);
    if (vf) term = add(term, mesh_term(vf->inf.meshes));
    out.add("reg_mesh", scale(term, w.r_mesh));
  }
  if (w.r_offset > 0.0) {
    Array term = offset_term(fit.delta);
    if (vf) term = add(term, offset_term(vf->inf.delta));
    out.add("reg_offset", scale(term, w.r_offset));
  }
  if (w.r_v > 0.0) {
    Rng eta_rng(tc.seed, "eta-v", iter);
    Array eta = Array::constant({b_count, m.net_cfg.dim_v},
                                eta_rng.normals(b_count * m.net_cfg.dim_v));
    uint64_t swd_seed = Rng(tc.seed, "swd-v", iter).next_u64();
    out.add("reg_swd_v",
            scale(dist::sliced_wasserstein(fit.v, eta, tc.swd_projections, swd_seed), w.r_v));
  }
  if (vf && w.r_v_tilde > 0.0) {
    int64_t vb = vf->inf.v.dim(0);
    Rng eta_rng(tc.seed, "eta-vt", iter);
    Array eta =
        Array::constant({vb, m.net_cfg.dim_v}, eta_rng.normals(vb * m.net_cfg.dim_v));
    uint64_t swd_seed = Rng(tc.seed, "swd-vt", iter).next_u64();
    out.add("reg_swd_vt",
            scale(dist::sliced_wasserstein(vf->inf.v, eta, tc.swd_projections, swd_seed),
                  w.r_v_tilde));
  }
  if (vf) {
    int64_t vb = vf->inf.probabilities.dim(0);
    if (w.r_div_rot > 0.0) {
      std::vector<Array> vals;
      for (int64_t b = 0; b < vb; ++b) {
        Array rots = slice_rows(vf->inf.poses.rotations, b * n_h, (b + 1) * n_h);
        Array pairwise = geom::geodesic_pairwise(rots, rots);
        Array p_row = slice_rows(vf->inf.probabilities, b, b + 1);
        Array outer = matmul(transpose(p_row), p_row);
        vals.push_back(sum(mul(outer, pairwise)));
      }
      out.add("reg_div_rot", scale(batch_mean(vals), -w.r_div_rot / M_PI));
    }
    if (w.r_div_xi > 0.0) {
      Array best = vf->inf.best_xi();
      Array acc;
      for (int i = 0; i < n_h; ++i) {
        Array d = sum_axes(square(sub(vf->inf.xi[i], best)), {1});
        acc = i == 0 ? d : add(acc, d);
      }
      out.add("reg_div_xi",
              scale(mean(acc), w.r_div_xi / static_cast<double>(n_h * m.net_cfg.dim_xi_t)));
    }
    if (w.r_div_trans > 0.0) {
      Array best = vf->inf.best_rows(vf->inf.poses.translations);
      Array acc;
      for (int i = 0; i < n_h; ++i) {
        Array t_i = hypothesis_rows(vf->inf.poses.translations, vb, n_h, i);
        Array d = sum_axes(square(sub(t_i, best)), {1});
        acc = i == 0 ? d : add(acc, d);
      }
      out.add("reg_div_trans", scale(mean(acc), w.r_div_trans / (3.0 * n_h)));
    }
    if (w.r_adv > 0.0) {
      int64_t s = m.net_cfg.image_size;
      std::vector<Array> flat_tex;
      for (int i = 0; i < n_h; ++i) flat_tex.push_back(vf->tex[i].image.reshape({vb, 3 * s * s}));
      std::vector<Array> rows;
      for (int64_t b = 0; b < vb; ++b)
        rows.push_back(slice_rows(flat_tex[vf->inf.best[b]], b, b + 1));
      Array best_tex = concat_rows(rows).reshape({vb, 3, s, s});
      Array predicted = m.a_rot(best_tex, false);
      Array r_best = vf->inf.best_rows(vf->inf.poses.rotations);
      out.add("reg_adv", scale(mean(geom::geodesic_rows(r_best, predicted)), -w.r_adv));
    }
  }
  return out;
}

DrSample dr_sample(const geom::TemplateMesh& tpl, const net::NetworkConfig& cfg, int64_t batch,
                   uint64_t master_seed, uint64_t iteration) {
  Rng pose_rng(master_seed, "dr-pose", iteration);
  Rng tex_rng(master_seed, "dr-tex", iteration);
  DrSample out;
  std::vector<double> rot(batch * 9), trans(batch * 3);
  for (int64_t b = 0; b < batch; ++b) {
    // viewpoint uniform on the upper hemisphere (object up = +z)
    double az = pose_rng.uniform(0.0, 2.0 * M_PI);
    double z = pose_rng.uniform();
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double u[3] = {r * std::cos(az), r * std::sin(az), z};
    double f[3] = {-u[0], -u[1], -u[2]};  // camera forward, object frame
    double ref[3] = {0.0, 0.0, 1.0};
    if (std::abs(u[2]) > 0.99) ref[1] = 1.0, ref[2] = 0.0;
    double right[3] = {ref[1] * f[2] - ref[2] * f[1], ref[2] * f[0] - ref[0] * f[2],
                       ref[0] * f[1] - ref[1] * f[0]};
    double rn = std::sqrt(right[0] * right[0] + right[1] * right[1] + right[2] * right[2]);
    for (double& c : right) c /= rn;
    double down[3] = {f[1] * right[2] - f[2] * right[1], f[2] * right[0] - f[0] * right[2],
                      f[0] * right[1] - f[1] * right[0]};
    // rows transform: world = object * R, columns are (right, down, forward)
    for (int i = 0; i < 3; ++i) {
      rot[b * 9 + i * 3 + 0] = right[i];
      rot[b * 9 + i * 3 + 1] = down[i];
      rot[b * 9 + i * 3 + 2] = f[i];
    }
    trans[b * 3 + 0] = pose_rng.uniform(-cfg.box_xy, cfg.box_xy);
    trans[b * 3 + 1] = pose_rng.uniform(-cfg.box_xy, cfg.box_xy);
    trans[b * 3 + 2] = pose_rng.uniform(cfg.box_z_lo, cfg.box_z_hi);
  }
  out.pose.angles = Array::zeros({batch, 3});
  out.pose.rotations = Array::constant({batch, 9}, std::move(rot));
  out.pose.translations = Array::constant({batch, 3}, std::move(trans));

  int64_t n_v = tpl.n_vertices();
  const std::vector<double>& verts = tpl.mesh.vertices;
  std::vector<double> nodal(batch * n_v * 3);
  for (int64_t b = 0; b < batch; ++b) {
    double n[3] = {tex_rng.normal(), tex_rng.normal(), tex_rng.normal()};
    double nn = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if (nn < 1e-12) n[2] = nn = 1.0;
    for (double& c : n) c /= nn;
    double offset = tex_rng.uniform(-0.3, 0.3);
    double c1[3] = {tex_rng.uniform(), tex_rng.uniform(), tex_rng.uniform()};
    double c2[3] = {tex_rng.uniform(), tex_rng.uniform(), tex_rng.uniform()};
    for (int64_t v = 0; v < n_v; ++v) {
      double side = n[0] * verts[v * 3] + n[1] * verts[v * 3 + 1] + n[2] * verts[v * 3 + 2] - offset;
      const double* c = side >= 0.0 ? c1 : c2;
      for (int d = 0; d < 3; ++d) nodal[(b * n_v + v) * 3 + d] = c[d];
    }
  }
  out.nodal = Array::constant({batch, n_v * 3}, std::move(nodal));
  return out;
}

}  // namespace cygr::pipeline
