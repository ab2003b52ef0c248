#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cygr/dist/pose_buffer.hpp"
#include "cygr/dist/sinkhorn.hpp"
#include "cygr/geom/losses.hpp"
#include "cygr/net/nets.hpp"
#include "cygr/pipeline/config.hpp"

namespace cygr::pipeline {

/// All learned components plus the shared template, camera and rasterizer
/// settings. Parameters live in one registry under fixed name prefixes so
/// optimizer groups and checkpoints address them stably.
class Model {
 public:
  /// Default construction builds the sphere template; it must agree with
  /// the profile's vertex count.
  Model(const TrainConfig& cfg, uint64_t seed);
  Model(const TrainConfig& cfg, uint64_t seed, geom::TemplateMesh t);

  net::ParamRegistry reg;
  geom::TemplateMesh tpl;
  net::NetworkConfig net_cfg;
  render::Camera camera;
  render::RasterSettings raster;
  int64_t n_surface_samples;

  net::PointNetEncoder f_v;      // "fv"  shape -> latent
  net::OffsetDecoder f_delta;    // "fd"  latent -> nodal offsets
  net::PoseDecoder f_p;          // "fp"  latent pose -> transform
  net::TextureDecoder f_t;       // "ft"  latent texture + mesh -> texture
  net::ImageEncoder h_q;         // "hq"  image -> q
  net::InferenceHeads heads;     // "hh"  q -> shape latent + hypotheses
  net::TextureInference h_t;     // "ht"  (q, v, unprojection) -> xi_T
  net::ConvCritic c_image;       // "ci"  critic on RGBA renders
  net::ConvCritic c_texture;     // "ct"  critic on RGB texture images
  net::ShapeCritic c_shape;      // "cs"  critic on (v, mesh) pairs
  net::RotationAdversary a_rot;  // "ar"  texture image -> rotation estimate

  std::vector<Parameter*> generator_params();  // everything except critics/adversary
  std::vector<Parameter*> critic_params(const std::string& prefix);

  /// Template vertices as a [1, V*3] row for batched mesh assembly.
  const Array& template_row() const { return tpl_row_; }

  /// First half of the graphics cycle: latent shape and canonical meshes.
  struct ShapeFit {
    Array v;                    // [B, dim_v]
    Array delta;                // [B, V*3]
    std::vector<Array> meshes;  // canonical nodal positions, [V,3] each
  };
  ShapeFit fit_shapes(const std::vector<Array>& clouds, bool training);

  /// Canonical mesh to scene coordinates. The pose rows are detached here:
  /// adversarial gradients must not reach the pose networks through the
  /// renderer or the unprojection.
  Array scene_mesh(const Array& mesh, const Array& rot_row, const Array& trans_row) const;

  /// Second half of the graphics cycle / first half of the vision cycle.
  struct RenderPass {
    net::PoseBatch pose;
    net::TextureOut tex;         // image empty for nodal-colour passes
    std::vector<Array> scene;    // [V,3] per sample
    std::vector<Array> renders;  // [4,H,W] per sample
  };
  RenderPass render_shapes(const ShapeFit& fit, const net::PoseBatch& pose, const Array& xi_t,
                           bool training);
  /// Same path with given nodal colours [B, V*3] instead of a decoded texture.
  RenderPass render_shapes_nodal(const ShapeFit& fit, const net::PoseBatch& pose,
                                 const Array& nodal, bool training);

  /// Image batch to latent shape, pose hypotheses and per-hypothesis latent
  /// textures. One canonical mesh per sample, shared by all hypotheses.
  struct Inference {
    Array q;              // [B, dim_q]
    Array v;              // [B, dim_v]
    Array delta;          // [B, V*3]
    std::vector<Array> meshes;                     // canonical, [V,3]
    net::PoseBatch poses;                          // [B*n_h] rows grouped by sample
    Array probabilities;                           // [B, n_h], rows sum to 1
    std::vector<int> best;                         // argmax probability, ties -> lowest index
    std::vector<std::vector<Array>> scene_meshes;  // [b][i], pose rows detached
    std::vector<Array> xi;                         // per hypothesis: [B, dim_xi_t]

    /// Rows b*n_h + best[b] of a hypothesis-grouped [B*n_h, d] stack.
    Array best_rows(const Array& grouped) const;
    /// Per-sample best rows of the per-hypothesis stacks xi[i].
    Array best_xi() const;
  };
  Inference image_to_shape(const std::vector<Array>& images, bool training);

  /// Full shape -> image translation (latents to render) in one call.
  struct GraphicsOutput {
    ShapeFit fit;
    RenderPass pass;
  };
  GraphicsOutput shape_to_image(const std::vector<Array>& clouds, const Array& xi_t,
                                const Array& xi_p, bool training);

  /// Vision cycle forward: inference plus per-hypothesis textures and
  /// reconstructions.
  struct VisionForward {
    Inference inf;
    std::vector<net::TextureOut> tex;         // per hypothesis
    std::vector<std::vector<Array>> renders;  // [i][b] -> [4,H,W]
  };
  VisionForward vision_forward(const std::vector<Array>& images, bool training);

 private:
  Array tpl_row_;
  RenderPass render_with_texture(const ShapeFit& fit, const net::PoseBatch& pose,
                                 net::TextureOut tex);
  std::vector<Array> stack_unprojections(const std::vector<Array>& images,
                                         const Inference& inf) const;
};

/// [B,C,H,W] batch from per-sample [C,H,W] arrays.
Array stack_image_batch(const std::vector<Array>& images);

/// Ordered named scalar contributions to the objective; values are the
/// weighted terms exactly as they enter the total.
struct TermList {
  std::vector<std::pair<std::string, Array>> terms;
  void add(std::string name, Array value) { terms.emplace_back(std::move(name), std::move(value)); }
  void append(TermList other) {
    for (auto& t : other.terms) terms.push_back(std::move(t));
  }
  Array total() const;
};

/// Chamfer and normal agreement between each input cloud and its fitted
/// canonical mesh; positions are matched on surface samples and vertices,
/// normals on the samples.
TermList shape_fit_losses(Model& m, const LossWeights& w, const std::vector<Array>& clouds,
                          const Model::ShapeFit& fit, Rng& rng);

/// Cycle-consistency terms between the first-pass code and the second-pass
/// inference. `xi_t` enables the latent texture reconstruction; `dr_nodal`
/// replaces it with a nodal texture reconstruction against the given
/// colours. `prefix` names the emitted terms; `scale` is the stage-4 anneal
/// factor applied to every term.
TermList graphics_cycle_losses(Model& m, const LossWeights& w, const Model::ShapeFit& fit,
                               const Model::RenderPass& pass, const std::optional<Array>& xi_t,
                               const std::optional<Array>& dr_nodal,
                               const Model::Inference& second, const std::string& prefix,
                               double scale, bool training);

/// Critic terms on sampled renders and textures plus the Sinkhorn match
/// between sampled poses and the buffer of recently inferred ones. Buffer
/// entries are constants. The pose term is skipped while the buffer is
/// empty.
TermList graphics_distribution_losses(Model& m, const LossWeights& w, const TrainConfig& tc,
                                      const Model::RenderPass& pass,
                                      const dist::PoseBuffer& buffer, double scale, uint64_t iter);

/// Hypothesis-weighted pixel and critic-feature reconstruction terms plus
/// the distribution terms on inferred shapes and best-hypothesis latent
/// textures.
TermList vision_cycle_losses(Model& m, const LossWeights& w, const TrainConfig& tc,
                             const std::vector<Array>& images, const Model::VisionForward& vf,
                             uint64_t iter);

/// Mesh/offset regularizers on every canonical mesh in play, latent priors,
/// hypothesis diversity terms and the pose-from-texture adversary term.
TermList regularization_losses(Model& m, const LossWeights& w, const TrainConfig& tc,
                               const Model::ShapeFit& fit, const Model::VisionForward* vf,
                               uint64_t iter);

/// Hand-crafted pose and texture distributions for the randomized graphics
/// cycle: a look-at rotation from a uniform upper-hemisphere viewpoint with
/// a uniform box translation, and two-colour textures split by a random
/// plane over the template vertices.
struct DrSample {
  net::PoseBatch pose;  // constant rows
  Array nodal;          // [B, V*3] colours in [0,1], constant
};
DrSample dr_sample(const geom::TemplateMesh& tpl, const net::NetworkConfig& cfg, int64_t batch,
                   uint64_t master_seed, uint64_t iteration);

}  // namespace cygr::pipeline
