#include "cygr/pipeline/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cygr::pipeline {

using nlohmann::json;

CurriculumState curriculum_stage(const Curriculum& c, int64_t iteration) {
  if (iteration < 0) throw std::invalid_argument("curriculum: negative iteration");
  CurriculumState s;
  int64_t b1 = c.n1, b2 = b1 + c.n2, b3 = b2 + c.n3, b4 = b3 + c.n4;
  if (iteration < b1) {
    s.stage = 1;
  } else if (iteration < b2) {
    s.stage = 2;
  } else if (iteration < b3) {
    s.stage = 3;
  } else if (iteration < b4) {
    s.stage = 4;
    s.lambda = static_cast<double>(iteration - b3) / static_cast<double>(c.n4);
  } else {
    s.stage = 5;
    s.lambda = 1.0;
  }
  return s;
}

namespace {

json weights_to_json(const LossWeights& w) {
  return json{{"g_image", w.g_image},
              {"g_texture", w.g_texture},
              {"g_pose", w.g_pose},
              {"g_v", w.g_v},
              {"g_mesh", w.g_mesh},
              {"g_trans", w.g_trans},
              {"g_xi", w.g_xi},
              {"g_rot", w.g_rot},
              {"g_chamfer", w.g_chamfer},
              {"g_normals", w.g_normals},
              {"g_tex_nodal", w.g_tex_nodal},
              {"v_shape", w.v_shape},
              {"v_xi", w.v_xi},
              {"v_pixel", w.v_pixel},
              {"v_percep", w.v_percep},
              {"r_mesh", w.r_mesh},
              {"r_offset", w.r_offset},
              {"r_adv", w.r_adv},
              {"r_v", w.r_v},
              {"r_v_tilde", w.r_v_tilde},
              {"r_div_rot", w.r_div_rot},
              {"r_div_xi", w.r_div_xi},
              {"r_div_trans", w.r_div_trans},
              {"mesh_edge", w.mesh_edge},
              {"mesh_laplacian", w.mesh_laplacian},
              {"mesh_flatness", w.mesh_flatness}};
}

void weights_from_json(const json& j, LossWeights& w) {
  w.g_image = j.value("g_image", w.g_image);
  w.g_texture = j.value("g_texture", w.g_texture);
  w.g_pose = j.value("g_pose", w.g_pose);
  w.g_v = j.value("g_v", w.g_v);
  w.g_mesh = j.value("g_mesh", w.g_mesh);
  w.g_trans = j.value("g_trans", w.g_trans);
  w.g_xi = j.value("g_xi", w.g_xi);
  w.g_rot = j.value("g_rot", w.g_rot);
  w.g_chamfer = j.value("g_chamfer", w.g_chamfer);
  w.g_normals = j.value("g_normals", w.g_normals);
  w.g_tex_nodal = j.value("g_tex_nodal", w.g_tex_nodal);
  w.v_shape = j.value("v_shape", w.v_shape);
  w.v_xi = j.value("v_xi", w.v_xi);
  w.v_pixel = j.value("v_pixel", w.v_pixel);
  w.v_percep = j.value("v_percep", w.v_percep);
  w.r_mesh = j.value("r_mesh", w.r_mesh);
  w.r_offset = j.value("r_offset", w.r_offset);
  w.r_adv = j.value("r_adv", w.r_adv);
  w.r_v = j.value("r_v", w.r_v);
  w.r_v_tilde = j.value("r_v_tilde", w.r_v_tilde);
  w.r_div_rot = j.value("r_div_rot", w.r_div_rot);
  w.r_div_xi = j.value("r_div_xi", w.r_div_xi);
  w.r_div_trans = j.value("r_div_trans", w.r_div_trans);
  w.mesh_edge = j.value("mesh_edge", w.mesh_edge);
  w.mesh_laplacian = j.value("mesh_laplacian", w.mesh_laplacian);
  w.mesh_flatness = j.value("mesh_flatness", w.mesh_flatness);
}

json network_to_json(const net::NetworkConfig& n) {
  return json{{"dim_v", n.dim_v},
              {"dim_q", n.dim_q},
              {"dim_xi_p", n.dim_xi_p},
              {"dim_xi_t", n.dim_xi_t},
              {"n_h", n.n_h},
              {"n_vertices", n.n_vertices},
              {"image_size", n.image_size},
              {"box_xy", n.box_xy},
              {"box_z_lo", n.box_z_lo},
              {"box_z_hi", n.box_z_hi},
              {"pointnet_point_widths", n.pointnet_point_widths},
              {"pointnet_global_widths", n.pointnet_global_widths},
              {"offset_hidden", n.offset_hidden},
              {"pose_hidden", n.pose_hidden},
              {"mesh_pre_hidden", n.mesh_pre_hidden},
              {"dim_z_m", n.dim_z_m},
              {"gen_base_channels", n.gen_base_channels},
              {"enc_base_channels", n.enc_base_channels},
              {"enc_blocks_per_stage", n.enc_blocks_per_stage},
              {"critic_base_channels", n.critic_base_channels},
              {"gv_hidden", n.gv_hidden},
              {"gu_hidden", n.gu_hidden},
              {"dim_z_v", n.dim_z_v},
              {"dim_z_u", n.dim_z_u},
              {"gz_hidden", n.gz_hidden},
              {"shape_critic_mesh_hidden", n.shape_critic_mesh_hidden},
              {"dim_y_m", n.dim_y_m},
              {"shape_critic_vec_hidden", n.shape_critic_vec_hidden},
              {"rot_adv_channels", n.rot_adv_channels}};
}

void network_from_json(const json& j, net::NetworkConfig& n) {
  n.dim_v = j.value("dim_v", n.dim_v);
  n.dim_q = j.value("dim_q", n.dim_q);
  n.dim_xi_p = j.value("dim_xi_p", n.dim_xi_p);
  n.dim_xi_t = j.value("dim_xi_t", n.dim_xi_t);
  n.n_h = j.value("n_h", n.n_h);
  n.n_vertices = j.value("n_vertices", n.n_vertices);
  n.image_size = j.value("image_size", n.image_size);
  n.box_xy = j.value("box_xy", n.box_xy);
  n.box_z_lo = j.value("box_z_lo", n.box_z_lo);
  n.box_z_hi = j.value("box_z_hi", n.box_z_hi);
  n.pointnet_point_widths = j.value("pointnet_point_widths", n.pointnet_point_widths);
  n.pointnet_global_widths = j.value("pointnet_global_widths", n.pointnet_global_widths);
  n.offset_hidden = j.value("offset_hidden", n.offset_hidden);
  n.pose_hidden = j.value("pose_hidden", n.pose_hidden);
  n.mesh_pre_hidden = j.value("mesh_pre_hidden", n.mesh_pre_hidden);
  n.dim_z_m = j.value("dim_z_m", n.dim_z_m);
  n.gen_base_channels = j.value("gen_base_channels", n.gen_base_channels);
  n.enc_base_channels = j.value("enc_base_channels", n.enc_base_channels);
  n.enc_blocks_per_stage = j.value("enc_blocks_per_stage", n.enc_blocks_per_stage);
  n.critic_base_channels = j.value("critic_base_channels", n.critic_base_channels);
  n.gv_hidden = j.value("gv_hidden", n.gv_hidden);
  n.gu_hidden = j.value("gu_hidden", n.gu_hidden);
  n.dim_z_v = j.value("dim_z_v", n.dim_z_v);
  n.dim_z_u = j.value("dim_z_u", n.dim_z_u);
  n.gz_hidden = j.value("gz_hidden", n.gz_hidden);
  n.shape_critic_mesh_hidden = j.value("shape_critic_mesh_hidden", n.shape_critic_mesh_hidden);
  n.dim_y_m = j.value("dim_y_m", n.dim_y_m);
  n.shape_critic_vec_hidden = j.value("shape_critic_vec_hidden", n.shape_critic_vec_hidden);
  n.rot_adv_channels = j.value("rot_adv_channels", n.rot_adv_channels);
}

}  // namespace

void save_train_config(const std::string& path, const TrainConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["batch_size"] = cfg.batch_size;
  j["profile"] = cfg.profile;
  j["sphere_segments"] = cfg.sphere_segments;
  j["sphere_rings"] = cfg.sphere_rings;
  j["network"] = network_to_json(cfg.net);
  j["weights"] = weights_to_json(cfg.weights);
  j["curriculum"] = json{{"n1", cfg.curriculum.n1},
                         {"n2", cfg.curriculum.n2},
                         {"n3", cfg.curriculum.n3},
                         {"n4", cfg.curriculum.n4},
                         {"n5", cfg.curriculum.n5}};
  j["lr_generator"] = cfg.lr_generator;
  j["lr_critic"] = cfg.lr_critic;
  j["lr_adversary"] = cfg.lr_adversary;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["critic_weight_decay"] = cfg.critic_weight_decay;
  j["generator_clip_norm"] = cfg.generator_clip_norm;
  j["gp_weight"] = cfg.gp_weight;
  j["drift_weight"] = cfg.drift_weight;
  j["real_mix_prob"] = cfg.real_mix_prob;
  j["sinkhorn_eps"] = cfg.sinkhorn_eps;
  j["swd_projections"] = cfg.swd_projections;
  j["n_cloud_points"] = cfg.n_cloud_points;
  j["n_surface_samples"] = cfg.n_surface_samples;
  j["pose_buffer_capacity"] = cfg.pose_buffer_capacity;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["data_manifest"] = cfg.data_manifest;
  j["out_dir"] = cfg.out_dir;
  j["camera"] = json{{"focal_px", cfg.camera.focal_px},
                     {"cx", cfg.camera.cx},
                     {"cy", cfg.camera.cy},
                     {"width", cfg.camera.width},
                     {"height", cfg.camera.height}};
  j["raster"] = json{{"sigma", cfg.raster.sigma},
                     {"gamma", cfg.raster.gamma},
                     {"z_near", cfg.raster.z_near},
                     {"z_far", cfg.raster.z_far},
                     {"background", cfg.raster.background},
                     {"cutoff", cfg.raster.cutoff}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << j.dump(2) << "\n";
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot read " + path);
  json j = json::parse(in);
  TrainConfig cfg;
  cfg.profile = j.value("profile", cfg.profile);
  if (cfg.profile == "desk") {
    cfg.net = net::NetworkConfig::desk();
  } else if (cfg.profile == "paper") {
    cfg.net = net::NetworkConfig::paper();
  } else {
    throw std::runtime_error("config: unknown profile '" + cfg.profile + "'");
  }
  if (j.contains("network")) network_from_json(j["network"], cfg.net);
  if (j.contains("weights")) weights_from_json(j["weights"], cfg.weights);
  if (j.contains("curriculum")) {
    const json& c = j["curriculum"];
    cfg.curriculum.n1 = c.value("n1", cfg.curriculum.n1);
    cfg.curriculum.n2 = c.value("n2", cfg.curriculum.n2);
    cfg.curriculum.n3 = c.value("n3", cfg.curriculum.n3);
    cfg.curriculum.n4 = c.value("n4", cfg.curriculum.n4);
    cfg.curriculum.n5 = c.value("n5", cfg.curriculum.n5);
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.sphere_segments = j.value("sphere_segments", cfg.sphere_segments);
  cfg.sphere_rings = j.value("sphere_rings", cfg.sphere_rings);
  cfg.lr_generator = j.value("lr_generator", cfg.lr_generator);
  cfg.lr_critic = j.value("lr_critic", cfg.lr_critic);
  cfg.lr_adversary = j.value("lr_adversary", cfg.lr_adversary);
  cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
  cfg.critic_weight_decay = j.value("critic_weight_decay", cfg.critic_weight_decay);
  cfg.generator_clip_norm = j.value("generator_clip_norm", cfg.generator_clip_norm);
  cfg.gp_weight = j.value("gp_weight", cfg.gp_weight);
  cfg.drift_weight = j.value("drift_weight", cfg.drift_weight);
  cfg.real_mix_prob = j.value("real_mix_prob", cfg.real_mix_prob);
  cfg.sinkhorn_eps = j.value("sinkhorn_eps", cfg.sinkhorn_eps);
  cfg.swd_projections = j.value("swd_projections", cfg.swd_projections);
  cfg.n_cloud_points = j.value("n_cloud_points", cfg.n_cloud_points);
  cfg.n_surface_samples = j.value("n_surface_samples", cfg.n_surface_samples);
  cfg.pose_buffer_capacity = j.value("pose_buffer_capacity", cfg.pose_buffer_capacity);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.data_manifest = j.value("data_manifest", cfg.data_manifest);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("camera")) {
    const json& c = j["camera"];
    cfg.camera.focal_px = c.value("focal_px", cfg.camera.focal_px);
    cfg.camera.cx = c.value("cx", cfg.camera.cx);
    cfg.camera.cy = c.value("cy", cfg.camera.cy);
    cfg.camera.width = c.value("width", cfg.camera.width);
    cfg.camera.height = c.value("height", cfg.camera.height);
  }
  if (j.contains("raster")) {
    const json& r = j["raster"];
    cfg.raster.sigma = r.value("sigma", cfg.raster.sigma);
    cfg.raster.gamma = r.value("gamma", cfg.raster.gamma);
    cfg.raster.z_near = r.value("z_near", cfg.raster.z_near);
    cfg.raster.z_far = r.value("z_far", cfg.raster.z_far);
    cfg.raster.background = r.value("background", cfg.raster.background);
    cfg.raster.cutoff = r.value("cutoff", cfg.raster.cutoff);
  }
  return cfg;
}

}  // namespace cygr::pipeline
