#pragma once

#include "cygr/dist/wgan.hpp"
#include "cygr/net/layers.hpp"

namespace cygr::net {

/// Width/depth profile for every learned component. The latent
/// dimensionalities (v, q, xi_p, xi_T, hypothesis count, template size,
/// image size) are interface contracts; hidden widths scale between the
/// full-size profile and a slim profile for CPU-scale runs.
struct NetworkConfig {
  int64_t dim_v = 64, dim_q = 512, dim_xi_p = 16, dim_xi_t = 128;
  int n_h = 4;
  int64_t n_vertices = 1002;
  int image_size = 64;

  // translation box for decoded/inferred poses
  double box_xy = 0.5, box_z_lo = 1.5, box_z_hi = 3.5;

  std::vector<int64_t> pointnet_point_widths{64, 128, 1024};  // per-point, then max-pool
  std::vector<int64_t> pointnet_global_widths{512, 512};
  std::vector<int64_t> offset_hidden{600, 900, 1200};
  int64_t pose_hidden = 64;
  int64_t mesh_pre_hidden = 800;
  int64_t dim_z_m = 400;
  int64_t gen_base_channels = 1024;  // at 4x4; halves per upsampling block
  int64_t enc_base_channels = 64;
  int enc_blocks_per_stage = 2;      // 4 stages; 2 blocks each mirrors ResNet-18
  int64_t critic_base_channels = 64;
  int64_t gv_hidden = 128, gu_hidden = 512;
  int64_t dim_z_v = 32, dim_z_u = 512;
  std::vector<int64_t> gz_hidden;    // empty: use {3*Dz, 2*Dz}
  int64_t shape_critic_mesh_hidden = 512;
  int64_t dim_y_m = 128;
  std::vector<int64_t> shape_critic_vec_hidden{512, 256, 128};
  int64_t rot_adv_channels = 16;

  int64_t dim_z() const { return dim_q + dim_z_v + dim_z_u; }
  int64_t dim_u() const { return n_vertices * 4; }  // RGBA sample per vertex

  static NetworkConfig paper() { return {}; }
  static NetworkConfig desk();
};

/// Permutation-invariant encoder over oriented point clouds [N,6] -> [dim_v].
/// Per-point LBA layers, max-pool over points, then LBA layers and a linear
/// head.
struct PointNetEncoder {
  std::vector<Linear> point_layers;
  std::vector<BatchNorm1d> point_bn;
  std::vector<Linear> global_layers;
  std::vector<BatchNorm1d> global_bn;
  Linear head;

  PointNetEncoder(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg);
  Array operator()(const Array& cloud, bool training);  // [N,6] -> [1,dim_v]
  /// Batched form: point layers and pooling run per cloud, the global
  /// layers see a [B, width] batch so their normalization is meaningful.
  Array encode_batch(const std::vector<Array>& clouds, bool training);
};

/// v -> nodal offsets, reshaped to [B, V*3] (callers view rows as [V,3]).
struct OffsetDecoder {
  Mlp mlp;
  int64_t n_vertices;

  OffsetDecoder(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg);
  Array operator()(const Array& v, bool training);  // [B,dim_v] -> [B, V*3]
};

struct PoseBatch {
  Array angles;        // [B,3] Tait-Bryan
  Array rotations;     // [B,9]
  Array translations;  // [B,3], inside the configured box
};

/// xi_p -> Euclidean transform; angles unbounded, translation tanh-boxed.
struct PoseDecoder {
  Mlp mlp;
  double box_xy, box_z_lo, box_z_hi;

  PoseDecoder(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg);
  PoseBatch operator()(const Array& xi_p, bool training);  // [B,16]
};

/// Raw pose head outputs -> boxed pose batch (shared by f_p and h_p).
PoseBatch pose_from_raw(const Array& raw6, double box_xy, double box_z_lo, double box_z_hi);

struct TextureOut {
  Array image;   // [B,3,S,S], tanh range [-1,1]
  Array nodal;   // [B, V*3], colours in [0,1] sampled at template uv
};

/// (xi_T, M) -> texture image and nodal colours. The mesh enters only
/// through its preprocessor and is gradient-detached there, so node
/// positions cannot be used to smuggle texture information.
struct TextureDecoder {
  Mlp mesh_pre;
  Linear stem;  // -> 4*4*base channels
  struct Block {
    BatchNorm2d bn1;
    ConvTranspose2dLayer up;  // 4x4, stride 2: doubles resolution
    BatchNorm2d bn2;
    Conv2dLayer conv;
    Conv2dLayer skip;         // 1x1 on the nearest-upsampled input
  };
  std::vector<Block> blocks;
  BatchNorm2d out_bn;
  Conv2dLayer out_conv;
  int64_t base_channels;
  int64_t n_vertices;

  TextureDecoder(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg);
  TextureOut operator()(const Array& xi_t, const Array& mesh, const Array& uv, bool training);
};

/// Image -> 512-vector; residual convolutional encoder (stem + 4 stages).
struct ImageEncoder {
  Conv2dLayer stem;
  BatchNorm2d stem_bn;
  struct Block {
    Conv2dLayer conv1, conv2;
    BatchNorm2d bn1, bn2;
    Conv2dLayer skip;  // 1x1 stride-matched when shape changes
    bool has_skip = false;
  };
  std::vector<Block> blocks;
  Linear head;

  ImageEncoder(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg);
  Array operator()(const Array& image, bool training);  // [B,4,S,S] -> [B,512]
};

struct Hypotheses {
  Array v;             // [B, dim_v]
  PoseBatch poses;     // stacked per hypothesis: [B*n_h, ...] rows grouped by sample
  Array probabilities; // [B, n_h], rows sum to 1
};

/// q -> (v-tilde, n_h pose hypotheses, hypothesis probabilities).
struct InferenceHeads {
  Linear shape_head;  // single fully connected layer
  Mlp pose_mlp;
  Mlp prob_mlp;
  int n_h;
  double box_xy, box_z_lo, box_z_hi;

  InferenceHeads(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg);
  Hypotheses operator()(const Array& q, bool training);
};

/// (q, v-tilde, U) -> xi_T-tilde. v-tilde is gradient-detached at this
/// input; the unprojection U carries the pose dependence.
struct TextureInference {
  Mlp g_v;  // 1 hidden, trailing BA, -> dim_z_v
  Mlp g_u;  // 1 hidden, trailing BA, -> dim_z_u
  Mlp g_z;  // -> dim_xi_t

  TextureInference(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg);
  Array operator()(const Array& q, const Array& v, const Array& u, bool training);
};

/// Residual convolutional critic (initial block, four downsampling blocks,
/// ReLU, spatial mean pool, linear). No normalization layers, so per-sample
/// input gradients are exact. `input_grad` builds the adjoint pass as a
/// graph over the same weights, which is what the gradient penalty
/// differentiates.
struct ConvCritic {
  struct Block {
    Conv2dLayer conv1, conv2, skip;
    bool downsample = false;
  };
  std::vector<Block> blocks;
  Linear head;
  int64_t in_channels;

  ConvCritic(ParamRegistry& reg, const std::string& name, int64_t in_channels,
             const NetworkConfig& cfg);
  Array score(const Array& x);                    // [B,C,S,S] -> [B,1]
  Array input_grad(const Array& x);               // [B,C,S,S] gradient of score
  /// Residual block outputs (one per block), for perceptual distances.
  std::vector<Array> features(const Array& x);
  dist::CriticView view();

 private:
  Array forward(const Array& x, std::vector<Array>* relu_in, std::vector<Array>* block_in);
};

/// Critic on (v-tilde, nodal positions): mesh branch to a 128-vector, then
/// an MLP on the concatenation. Batch normalization runs on batch statistics
/// when scoring and on frozen running statistics inside the gradient
/// penalty, where per-sample input gradients must be well-defined.
struct ShapeCritic {
  Mlp mesh_branch;  // trailing BA
  Mlp vec_critic;
  int64_t dim_v, mesh_dim;

  ShapeCritic(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg);
  Array score(const Array& vm, bool training);  // [B, dim_v + V*3] -> [B,1]
  Array input_grad(const Array& vm);            // eval-mode adjoint
  dist::CriticView view(bool training);

 private:
  Array mlp_forward(Mlp& mlp, const Array& x, bool training, std::vector<Array>* pre_elu);
  Array mlp_adjoint(Mlp& mlp, const Array& g_out, const std::vector<Array>& pre_elu);
};

/// Texture image -> rotation estimate via a small residual conv net and a
/// normalized quaternion.
struct RotationAdversary {
  Conv2dLayer stem;
  BatchNorm2d stem_bn;
  struct Block {
    Conv2dLayer conv1, conv2, skip;
    BatchNorm2d bn1, bn2;
  };
  std::vector<Block> blocks;
  Linear head;  // -> 4 quaternion components

  RotationAdversary(ParamRegistry& reg, const std::string& name, const NetworkConfig& cfg);
  Array operator()(const Array& image, bool training);  // [B,3,S,S] -> [B,9]
};

/// Rows of unit quaternions [B,4] (w,x,y,z) to rotation matrices [B,9].
Array quaternion_to_matrix_rows(const Array& q);

}  // namespace cygr::net
