#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cygr/pipeline/dataset.hpp"
#include "cygr/pipeline/model.hpp"

namespace cygr::pipeline {

/// One row of the loss CSV: the weighted value of every term that entered
/// the objective this iteration. A term absent from `terms` was not part of
/// the objective (stage-gated or zero-weighted) and serializes as an empty
/// cell.
struct LossRecord {
  int64_t iteration = 0;
  int stage = 1;
  double lambda = 0.0;
  std::vector<std::pair<std::string, double>> terms;

  bool has(const std::string& name) const;
  double term(const std::string& name) const;  // throws if absent
};

/// Owns the model, the optimizers, the pose buffer and the loss log.
/// Deterministic: every random draw comes from a counter-based stream keyed
/// by (seed, purpose, iteration), so identical configurations produce
/// bitwise-identical loss records, and terms never perturb each other's
/// randomness when toggled.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const Dataset& data);
  ~Trainer();

  /// One generator update plus one update for each active critic and the
  /// adversary; appends to the loss CSV and checkpoints periodically.
  /// Throws if any loss term is non-finite, naming the term.
  LossRecord train_step(int64_t iteration);

  /// Runs from the current iteration to the curriculum end (or max_steps
  /// more iterations when non-negative).
  void run(int64_t max_steps = -1);

  int64_t iteration() const { return iteration_; }
  Model& model() { return *model_; }
  const TrainConfig& config() const { return cfg_; }
  const dist::PoseBuffer& pose_buffer() const { return buffer_; }

  void save_state(const std::string& path);
  void load_state(const std::string& path);

  /// Fixed CSV column order (after iteration, stage, lambda).
  static const std::vector<std::string>& loss_columns();

 private:
  TrainConfig cfg_;
  std::unique_ptr<Model> model_;
  Adam gen_opt_, ci_opt_, ct_opt_, cs_opt_, ar_opt_;
  dist::PoseBuffer buffer_;
  int64_t iteration_ = 0;
  std::vector<Array> cloud_arrays_;  // [N,6] constants, one per dataset shape
  std::vector<Array> image_arrays_;  // [4,S,S] constants, one per dataset image
  std::string csv_path_;

  std::vector<Array> sample_cloud_batch(int64_t iter) const;
  std::vector<int64_t> sample_image_indices(int64_t iter) const;
  void append_record(const LossRecord& rec);
  void check_finite(const LossRecord& rec) const;
};

}  // namespace cygr::pipeline
