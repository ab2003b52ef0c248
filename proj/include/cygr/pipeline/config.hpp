#pragma once

#include <cstdint>
#include <string>

#include "cygr/net/nets.hpp"
#include "cygr/render/rasterizer.hpp"

namespace cygr::pipeline {

/// Every loss-term coefficient, defaulting to the full-size training
/// configuration. All weights are >= 0; a weight of exactly zero removes
/// its term from the objective and from the loss record.
struct LossWeights {
  // graphics cycle, distribution matching
  double g_image = 0.2;     // -C_I on sampled renders
  double g_texture = 0.2;   // -C_T on sampled texture images
  double g_pose = 10.0;     // pose-buffer Sinkhorn term
  // graphics cycle, cyclic consistency
  double g_v = 5.0;
  double g_mesh = 1000.0;
  double g_trans = 10.0;
  double g_xi = 5.0;
  double g_rot = 5.0;
  double g_chamfer = 2000.0;
  double g_normals = 5.0;
  // nodal texture reconstruction over all hypotheses; off by default, used
  // by the planes-category override set
  double g_tex_nodal = 0.0;
  // vision cycle
  double v_shape = 1.0;   // -C_s on inferred (v, M) pairs
  double v_xi = 5.0;      // SWD pulling best-hypothesis xi_T to the prior
  double v_pixel = 40.0;
  double v_percep = 200.0;
  // regularizers
  double r_mesh = 0.05;
  double r_offset = 0.05;
  double r_adv = 0.35;
  double r_v = 5.0;
  double r_v_tilde = 0.1;
  double r_div_rot = 0.1;
  double r_div_xi = 1.0;
  double r_div_trans = 10.0;
  // mesh regularizer sub-weights (edge / laplacian / flatness)
  double mesh_edge = 1500.0;
  double mesh_laplacian = 10.0;
  double mesh_flatness = 1.0;
};

/// Stage lengths in iterations. Stages: 1 shape fit, 2 randomized graphics
/// cycle, 3 adds the vision cycle, 4 anneals the learned graphics cycle in
/// and the randomized one out, 5 runs the full model.
struct Curriculum {
  int64_t n1 = 5000;
  int64_t n2 = 3000;
  int64_t n3 = 3000;
  int64_t n4 = 3000;
  int64_t n5 = 100000 - 14000;

  int64_t total() const { return n1 + n2 + n3 + n4 + n5; }
};

struct CurriculumState {
  int stage = 1;        // 1..5, determined solely by the iteration counter
  double lambda = 0.0;  // learned-cycle weight: 0 before stage 4, linear in
                        // stage-4 progress, 1 from stage 5 on
};

CurriculumState curriculum_stage(const Curriculum& c, int64_t iteration);

/// Full run description; serializes to a single structured text file with
/// every default as a named key.
struct TrainConfig {
  uint64_t seed = 1;
  int64_t batch_size = 8;  // 64 reproduces the full-size setting
  std::string profile = "desk";  // network width profile: "desk" or "paper"
  net::NetworkConfig net = net::NetworkConfig::desk();
  // template sphere resolution; vertex count segments*rings + 2 must match
  // the network profile
  int sphere_segments = 40, sphere_rings = 25;
  LossWeights weights;
  Curriculum curriculum;

  double lr_generator = 4e-4;
  double lr_critic = 1e-4;
  double lr_adversary = 5e-4;
  double adam_beta1 = 0.5, adam_beta2 = 0.99;
  double critic_weight_decay = 1e-3;
  // Global-norm clip on the generator update; tames the occasional large
  // rasterizer gradients early in training. Zero disables.
  double generator_clip_norm = 10.0;
  double gp_weight = 10.0;
  double drift_weight = 0.01;
  double real_mix_prob = 0.5;  // chance a critic real is swapped for its
                               // vision-cycle reconstruction
  double sinkhorn_eps = 0.05;
  int swd_projections = 150;

  int64_t n_cloud_points = 1000;     // points kept per input shape
  int64_t n_surface_samples = 1000;  // template samples in the chamfer term
  int64_t pose_buffer_capacity = 128;
  int64_t checkpoint_every = 500;

  std::string data_manifest;
  std::string out_dir = "run";

  render::Camera camera;
  render::RasterSettings raster;
};

void save_train_config(const std::string& path, const TrainConfig& cfg);
/// Reads a config written by save_train_config. "profile" is applied first,
/// then any explicitly present network keys override it.
TrainConfig load_train_config(const std::string& path);

}  // namespace cygr::pipeline
