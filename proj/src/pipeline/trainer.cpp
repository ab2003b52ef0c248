#include "cygr/pipeline/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cygr/dist/wgan.hpp"
#include "cygr/geom/transform.hpp"
#include "cygr/net/checkpoint.hpp"

namespace cygr::pipeline {

using namespace cygr::ops;

bool LossRecord::has(const std::string& name) const {
  for (const auto& [k, v] : terms)
    if (k == name) return true;
  return false;
}

double LossRecord::term(const std::string& name) const {
  for (const auto& [k, v] : terms)
    if (k == name) return v;
  throw std::out_of_range("loss record has no term '" + name + "'");
}

const std::vector<std::string>& Trainer::loss_columns() {
  static const std::vector<std::string> cols = {
      "fit_chamfer", "fit_normals",
      "dr_v", "dr_mesh", "dr_trans", "dr_rot", "dr_tex",
      "gc_v", "gc_mesh", "gc_trans", "gc_xi", "gc_rot", "gc_tr",
      "dg_image", "dg_texture", "dg_pose_rot", "dg_pose_trans",
      "vc_pixel", "vc_percep", "dv_shape", "dv_xi_swd",
      "reg_mesh", "reg_offset", "reg_swd_v", "reg_swd_vt",
      "reg_div_rot", "reg_div_xi", "reg_div_trans", "reg_adv",
      "total",
      "critic_image", "critic_texture", "critic_shape", "adversary"};
  return cols;
}

Trainer::Trainer(const TrainConfig& cfg, const Dataset& data)
    : cfg_(cfg), buffer_(cfg.pose_buffer_capacity) {
  if (data.shapes.empty()) throw std::invalid_argument("trainer: dataset has no shapes");
  if (data.images.empty()) throw std::invalid_argument("trainer: dataset has no images");
  model_ = std::make_unique<Model>(cfg_, cfg_.seed);

  for (const geom::PointCloud& pc : data.shapes) {
    Array a = cloud_to_array(pc);
    // subsample deterministically when a shape carries more points than the
    // configured budget; our own datasets are written at exactly the budget
    if (a.dim(0) > cfg_.n_cloud_points) a = slice_rows(a, 0, cfg_.n_cloud_points).detach();
    cloud_arrays_.push_back(a);
  }
  for (const render::ImageRGBA& img : data.images) {
    if (img.width != cfg_.net.image_size || img.height != cfg_.net.image_size)
      throw std::invalid_argument("trainer: image size does not match the network profile");
    image_arrays_.push_back(image_to_array(img));
  }

  gen_opt_ = Adam(model_->generator_params(), cfg_.lr_generator, cfg_.adam_beta1,
                  cfg_.adam_beta2, 0.0, cfg_.generator_clip_norm);
  ci_opt_ = Adam(model_->critic_params("ci"), cfg_.lr_critic, cfg_.adam_beta1, cfg_.adam_beta2,
                 cfg_.critic_weight_decay);
  ct_opt_ = Adam(model_->critic_params("ct"), cfg_.lr_critic, cfg_.adam_beta1, cfg_.adam_beta2,
                 cfg_.critic_weight_decay);
  cs_opt_ = Adam(model_->critic_params("cs"), cfg_.lr_critic, cfg_.adam_beta1, cfg_.adam_beta2,
                 cfg_.critic_weight_decay);
  ar_opt_ = Adam(model_->critic_params("ar"), cfg_.lr_adversary, cfg_.adam_beta1, cfg_.adam_beta2);

  std::filesystem::create_directories(cfg_.out_dir);
  save_train_config(cfg_.out_dir + "/config.json", cfg_);
  csv_path_ = cfg_.out_dir + "/losses.csv";
  std::error_code ec;
  if (!std::filesystem::exists(csv_path_, ec) || std::filesystem::file_size(csv_path_, ec) == 0) {
    std::ofstream out(csv_path_, std::ios::trunc);
    if (!out) throw std::runtime_error("trainer: cannot open " + csv_path_);
    out << "iteration,stage,lambda";
    for (const std::string& c : loss_columns()) out << "," << c;
    out << "\n";
  }
}

Trainer::~Trainer() = default;

std::vector<Array> Trainer::sample_cloud_batch(int64_t iter) const {
  Rng rng(cfg_.seed, "batch-shapes", static_cast<uint64_t>(iter));
  std::vector<Array> out;
  for (int64_t b = 0; b < cfg_.batch_size; ++b)
    out.push_back(cloud_arrays_[rng.uniform_int(static_cast<int64_t>(cloud_arrays_.size()))]);
  return out;
}

std::vector<int64_t> Trainer::sample_image_indices(int64_t iter) const {
  Rng rng(cfg_.seed, "batch-images", static_cast<uint64_t>(iter));
  std::vector<int64_t> out;
  for (int64_t b = 0; b < cfg_.batch_size; ++b)
    out.push_back(rng.uniform_int(static_cast<int64_t>(image_arrays_.size())));
  return out;
}

void Trainer::check_finite(const LossRecord& rec) const {
  for (const auto& [name, value] : rec.terms)
    if (!std::isfinite(value))
      throw std::runtime_error("non-finite loss term '" + name + "' at iteration " +
                               std::to_string(rec.iteration));
}

void Trainer::append_record(const LossRecord& rec) {
  std::ofstream out(csv_path_, std::ios::app);
  if (!out) throw std::runtime_error("trainer: cannot append to " + csv_path_);
  char buf[32];
  out << rec.iteration << "," << rec.stage << ",";
  std::snprintf(buf, sizeof buf, "%.17g", rec.lambda);
  out << buf;
  for (const std::string& c : loss_columns()) {
    out << ",";
    if (rec.has(c)) {
      std::snprintf(buf, sizeof buf, "%.17g", rec.term(c));
      out << buf;
    }
  }
  out << "\n";
}

LossRecord Trainer::train_step(int64_t iteration) {
  const LossWeights& w = cfg_.weights;
  CurriculumState cur = curriculum_stage(cfg_.curriculum, iteration);
  const uint64_t it = static_cast<uint64_t>(iteration);

  LossRecord rec;
  rec.iteration = iteration;
  rec.stage = cur.stage;
  rec.lambda = cur.lambda;

  const bool vc_on = cur.stage >= 3;
  const bool gc_on = cur.stage >= 4;
  const bool dr_on = cur.stage >= 2 && cur.stage <= 4;
  const double gc_scale = cur.stage == 4 ? cur.lambda : 1.0;
  const double dr_scale = cur.stage == 4 ? 1.0 - cur.lambda : 1.0;

  // detached tensors harvested from the generator graph for the critic and
  // adversary updates below (data outlives the graph scope)
  std::vector<Array> gc_renders, vc_recon_best;
  Array gc_tex_image, vc_tex_best, cs_real, cs_fake, ar_input, ar_target;
  std::vector<int64_t> image_idx;
  std::vector<std::array<double, 9>> push_rots;
  std::vector<std::array<double, 3>> push_trans;

  {
    GraphScope scope;
    TermList terms;

    std::vector<Array> clouds = sample_cloud_batch(iteration);
    Model::ShapeFit fit = model_->fit_shapes(clouds, true);
    Rng fit_rng(cfg_.seed, "surface-fit", it);
    terms.append(shape_fit_losses(*model_, w, clouds, fit, fit_rng));

    if (dr_on && dr_scale > 0.0) {
      DrSample dr = dr_sample(model_->tpl, cfg_.net, cfg_.batch_size, cfg_.seed, it);
      Model::RenderPass pass = model_->render_shapes_nodal(fit, dr.pose, dr.nodal, true);
      Model::Inference second = model_->image_to_shape(pass.renders, true);
      terms.append(graphics_cycle_losses(*model_, w, fit, pass, std::nullopt, dr.nodal, second,
                                         "dr", dr_scale, true));
    }

    if (gc_on) {
      Rng xt_rng(cfg_.seed, "gc-xi-t", it);
      Array xi_t = Array::constant({cfg_.batch_size, cfg_.net.dim_xi_t},
                                   xt_rng.normals(cfg_.batch_size * cfg_.net.dim_xi_t));
      Rng xp_rng(cfg_.seed, "gc-xi-p", it);
      Array xi_p = Array::constant({cfg_.batch_size, cfg_.net.dim_xi_p},
                                   xp_rng.normals(cfg_.batch_size * cfg_.net.dim_xi_p));
      net::PoseBatch pose = model_->f_p(xi_p, true);
      Model::RenderPass pass = model_->render_shapes(fit, pose, xi_t, true);
      for (const Array& r : pass.renders) gc_renders.push_back(r.detach());
      gc_tex_image = pass.tex.image.detach();
      // the annealed-out learned cycle still feeds the critics, but its
      // generator-side terms vanish at lambda = 0
      if (gc_scale > 0.0) {
        Model::Inference second = model_->image_to_shape(pass.renders, true);
        terms.append(graphics_cycle_losses(*model_, w, fit, pass, xi_t, std::nullopt, second,
                                           "gc", gc_scale, true));
        terms.append(
            graphics_distribution_losses(*model_, w, cfg_, pass, buffer_, gc_scale, it));
      }
    }

    Model::VisionForward vf;
    bool have_vf = false;
    if (vc_on) {
      image_idx = sample_image_indices(iteration);
      std::vector<Array> images;
      for (int64_t i : image_idx) images.push_back(image_arrays_[i]);
      vf = model_->vision_forward(images, true);
      have_vf = true;
      terms.append(vision_cycle_losses(*model_, w, cfg_, images, vf, it));

      int64_t vb = static_cast<int64_t>(images.size());
      int64_t s = cfg_.net.image_size;
      int n_h = cfg_.net.n_h;
      for (int64_t b = 0; b < vb; ++b)
        vc_recon_best.push_back(vf.renders[vf.inf.best[b]][b].detach());
      std::vector<Array> tex_rows;
      for (int64_t b = 0; b < vb; ++b) {
        Array flat = vf.tex[vf.inf.best[b]].image.reshape({vb, 3 * s * s});
        tex_rows.push_back(slice_rows(flat, b, b + 1));
      }
      vc_tex_best = concat_rows(tex_rows).reshape({vb, 3, s, s}).detach();
      cs_real = concat_cols({fit.v, add(fit.delta, model_->template_row())}).detach();
      cs_fake = concat_cols({vf.inf.v, add(vf.inf.delta, model_->template_row())}).detach();
      ar_input = vc_tex_best;
      ar_target = vf.inf.best_rows(vf.inf.poses.rotations).detach();
      const std::vector<double>& rot = vf.inf.poses.rotations.data();
      const std::vector<double>& trn = vf.inf.poses.translations.data();
      for (int64_t b = 0; b < vb; ++b) {
        int64_t row = b * n_h + vf.inf.best[b];
        std::array<double, 9> r9;
        std::array<double, 3> t3;
        std::copy_n(rot.begin() + row * 9, 9, r9.begin());
        std::copy_n(trn.begin() + row * 3, 3, t3.begin());
        push_rots.push_back(r9);
        push_trans.push_back(t3);
      }
    }

    terms.append(
        regularization_losses(*model_, w, cfg_, fit, have_vf ? &vf : nullptr, it));

    Array total = terms.total();
    for (const auto& [name, value] : terms.terms) rec.terms.emplace_back(name, value.item());
    rec.terms.emplace_back("total", total.item());
    check_finite(rec);

    backward(total);
    gen_opt_.zero_grad();
    gen_opt_.collect_grads();
    gen_opt_.step();
  }

  for (size_t b = 0; b < push_rots.size(); ++b) buffer_.push(push_rots[b], push_trans[b]);

  if (gc_on && !gc_renders.empty()) {
    GraphScope scope;
    Rng mix_rng(cfg_.seed, "ci-mix", it);
    std::vector<Array> reals;
    for (size_t b = 0; b < image_idx.size(); ++b) {
      bool swap = mix_rng.uniform() < cfg_.real_mix_prob;
      reals.push_back(swap ? vc_recon_best[b] : image_arrays_[image_idx[b]]);
    }
    Array real = stack_image_batch(reals);
    Array fake = stack_image_batch(gc_renders);
    Array loss = dist::wgan_critic_loss(model_->c_image.view(), real, fake, cfg_.gp_weight,
                                        cfg_.drift_weight, Rng(cfg_.seed, "gp-ci", it).next_u64());
    rec.terms.emplace_back("critic_image", loss.item());
    backward(loss);
    ci_opt_.zero_grad();
    ci_opt_.collect_grads();
    ci_opt_.step();
  }

  if (gc_on && gc_tex_image.size() > 0 && vc_tex_best.size() > 0) {
    GraphScope scope;
    Array loss =
        dist::wgan_critic_loss(model_->c_texture.view(), vc_tex_best, gc_tex_image,
                               cfg_.gp_weight, cfg_.drift_weight,
                               Rng(cfg_.seed, "gp-ct", it).next_u64());
    rec.terms.emplace_back("critic_texture", loss.item());
    backward(loss);
    ct_opt_.zero_grad();
    ct_opt_.collect_grads();
    ct_opt_.step();
  }

  if (vc_on && cs_real.size() > 0) {
    GraphScope scope;
    Array loss =
        dist::wgan_critic_loss(model_->c_shape.view(true), cs_real, cs_fake, cfg_.gp_weight,
                               cfg_.drift_weight, Rng(cfg_.seed, "gp-cs", it).next_u64());
    rec.terms.emplace_back("critic_shape", loss.item());
    backward(loss);
    cs_opt_.zero_grad();
    cs_opt_.collect_grads();
    cs_opt_.step();
  }

  if (vc_on && ar_input.size() > 0) {
    GraphScope scope;
    Array predicted = model_->a_rot(ar_input, true);
    Array loss = mean(geom::geodesic_rows(ar_target, predicted));
    rec.terms.emplace_back("adversary", loss.item());
    backward(loss);
    ar_opt_.zero_grad();
    ar_opt_.collect_grads();
    ar_opt_.step();
  }

  check_finite(rec);
  append_record(rec);
  iteration_ = iteration + 1;
  if (cfg_.checkpoint_every > 0 && iteration_ % cfg_.checkpoint_every == 0)
    save_state(cfg_.out_dir + "/state.ckpt");
  return rec;
}

void Trainer::run(int64_t max_steps) {
  int64_t end = cfg_.curriculum.total();
  if (max_steps >= 0) end = std::min(end, iteration_ + max_steps);
  while (iteration_ < end) train_step(iteration_);
}

void Trainer::save_state(const std::string& path) {
  net::Checkpoint ckpt;
  net::store_registry(ckpt, model_->reg);
  net::store_adam(ckpt, "gen", gen_opt_);
  net::store_adam(ckpt, "ci", ci_opt_);
  net::store_adam(ckpt, "ct", ct_opt_);
  net::store_adam(ckpt, "cs", cs_opt_);
  net::store_adam(ckpt, "ar", ar_opt_);
  ckpt.meta["iteration"] = static_cast<double>(iteration_);
  std::vector<double> flat = buffer_.flatten();
  ckpt.set_array("pose_buffer", {static_cast<int64_t>(flat.size() / 12), 12}, std::move(flat));
  net::save_checkpoint(path, ckpt);
}

void Trainer::load_state(const std::string& path) {
  net::Checkpoint ckpt = net::load_checkpoint(path);
  net::load_registry(ckpt, model_->reg);
  net::load_adam(ckpt, "gen", gen_opt_);
  net::load_adam(ckpt, "ci", ci_opt_);
  net::load_adam(ckpt, "ct", ct_opt_);
  net::load_adam(ckpt, "cs", cs_opt_);
  net::load_adam(ckpt, "ar", ar_opt_);
  iteration_ = static_cast<int64_t>(ckpt.meta.at("iteration"));
  if (ckpt.has_array("pose_buffer")) buffer_.restore(ckpt.array("pose_buffer").second);
}

}  // namespace cygr::pipeline
