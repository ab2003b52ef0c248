#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cygr/net/layers.hpp"

namespace cygr::net {

/// Deterministic binary state container. File layout (little-endian):
///   magic "CYGRCKP1"
///   u64 n_meta,   then per entry: u32 key_len, key bytes, f64 value
///   u64 n_arrays, then per entry: u32 key_len, key bytes,
///                                 u32 ndim, i64 dims[ndim], f64 data[numel]
/// Entries are written in key order, so identical state produces identical
/// bytes.
struct Checkpoint {
  std::map<std::string, double> meta;
  std::map<std::string, std::pair<Shape, std::vector<double>>> arrays;

  void set_array(const std::string& key, Shape shape, std::vector<double> data);
  const std::pair<Shape, std::vector<double>>& array(const std::string& key) const;
  bool has_array(const std::string& key) const { return arrays.count(key) > 0; }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Registry state <-> checkpoint. Parameters go under "param/<name>",
/// buffers under "buffer/<name>". Loading requires every registry entry to
/// be present with a matching shape and ignores extra checkpoint keys.
void store_registry(Checkpoint& ckpt, ParamRegistry& reg);
void load_registry(const Checkpoint& ckpt, ParamRegistry& reg);

/// Optimizer state under "adam/<key>/...", plus the step count in meta.
void store_adam(Checkpoint& ckpt, const std::string& key, Adam& opt);
void load_adam(const Checkpoint& ckpt, const std::string& key, Adam& opt);

}  // namespace cygr::net
