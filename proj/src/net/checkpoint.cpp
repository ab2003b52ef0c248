#include "cygr/net/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cygr::net {

namespace {

constexpr char kMagic[8] = {'C', 'Y', 'G', 'R', 'C', 'K', 'P', '1'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<uint32_t>(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  uint32_t n = get<uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

void Checkpoint::set_array(const std::string& key, Shape shape, std::vector<double> data) {
  if (numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("checkpoint: shape/data mismatch for " + key);
  arrays[key] = {std::move(shape), std::move(data)};
}

const std::pair<Shape, std::vector<double>>& Checkpoint::array(const std::string& key) const {
  auto it = arrays.find(key);
  if (it == arrays.end()) throw std::runtime_error("checkpoint: missing array " + key);
  return it->second;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<uint64_t>(os, ckpt.meta.size());
  for (const auto& [k, v] : ckpt.meta) {
    put_string(os, k);
    put<double>(os, v);
  }
  put<uint64_t>(os, ckpt.arrays.size());
  for (const auto& [k, sv] : ckpt.arrays) {
    put_string(os, k);
    put<uint32_t>(os, static_cast<uint32_t>(sv.first.size()));
    for (int64_t d : sv.first) put<int64_t>(os, d);
    os.write(reinterpret_cast<const char*>(sv.second.data()),
             static_cast<std::streamsize>(sv.second.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  Checkpoint ckpt;
  uint64_t n_meta = get<uint64_t>(is);
  for (uint64_t i = 0; i < n_meta; ++i) {
    std::string k = get_string(is);
    ckpt.meta[k] = get<double>(is);
  }
  uint64_t n_arrays = get<uint64_t>(is);
  for (uint64_t i = 0; i < n_arrays; ++i) {
    std::string k = get_string(is);
    uint32_t ndim = get<uint32_t>(is);
    Shape shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) shape[d] = get<int64_t>(is);
    std::vector<double> data(numel(shape));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    ckpt.arrays[k] = {std::move(shape), std::move(data)};
  }
  return ckpt;
}

void store_registry(Checkpoint& ckpt, ParamRegistry& reg) {
  for (Parameter* p : reg.all()) ckpt.set_array("param/" + p->name, p->shape, *p->value);
  for (auto& [name, buf] : reg.buffers())
    ckpt.set_array("buffer/" + name, {static_cast<int64_t>(buf->size())}, *buf);
}

void load_registry(const Checkpoint& ckpt, ParamRegistry& reg) {
  for (Parameter* p : reg.all()) {
    const auto& [shape, data] = ckpt.array("param/" + p->name);
    if (shape != p->shape)
      throw std::runtime_error("checkpoint: shape mismatch for param " + p->name);
    *p->value = data;
  }
  for (auto& [name, buf] : reg.buffers()) {
    const auto& [shape, data] = ckpt.array("buffer/" + name);
    if (data.size() != buf->size())
      throw std::runtime_error("checkpoint: size mismatch for buffer " + name);
    *buf = data;
  }
}

void store_adam(Checkpoint& ckpt, const std::string& key, Adam& opt) {
  const auto& params = opt.params();
  for (size_t i = 0; i < params.size(); ++i) {
    ckpt.set_array("adam/" + key + "/" + params[i]->name + ".m1", params[i]->shape,
                   opt.moment1()[i]);
    ckpt.set_array("adam/" + key + "/" + params[i]->name + ".m2", params[i]->shape,
                   opt.moment2()[i]);
  }
  ckpt.meta["adam/" + key + "/t"] = static_cast<double>(opt.step_count());
}

void load_adam(const Checkpoint& ckpt, const std::string& key, Adam& opt) {
  const auto& params = opt.params();
  for (size_t i = 0; i < params.size(); ++i) {
    opt.moment1()[i] = ckpt.array("adam/" + key + "/" + params[i]->name + ".m1").second;
    opt.moment2()[i] = ckpt.array("adam/" + key + "/" + params[i]->name + ".m2").second;
  }
  auto it = ckpt.meta.find("adam/" + key + "/t");
  if (it == ckpt.meta.end()) throw std::runtime_error("checkpoint: missing adam step for " + key);
  opt.step_count() = static_cast<uint64_t>(it->second);
}

}  // namespace cygr::net
