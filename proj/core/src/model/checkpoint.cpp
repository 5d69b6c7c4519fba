#include "seldkd/model/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace seldkd::model {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'L', 'D', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}
std::vector<double> read_doubles(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& config_text,
                     const std::map<std::string, std::string>& metadata,
                     const nn::ParamStore& store, const nn::Adam* optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create checkpoint: " + path);
  out.write(kMagic, 8);
  write_string(out, kCheckpointVersion);
  write_string(out, config_text);
  write_u32(out, static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    write_string(out, k);
    write_string(out, v);
  }
  write_u32(out, static_cast<std::uint32_t>(store.params().size()));
  for (const auto& [name, t] : store.params()) {
    write_string(out, name);
    write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    write_doubles(out, t.values());
  }
  write_u32(out, static_cast<std::uint32_t>(store.buffers().size()));
  for (const auto& [name, buf] : store.buffers()) {
    write_string(out, name);
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(buf->size()));
    write_doubles(out, *buf);
  }
  write_u32(out, optimizer != nullptr ? 1 : 0);
  if (optimizer != nullptr) {
    auto* opt = const_cast<nn::Adam*>(optimizer);
    write_u64(out, static_cast<std::uint64_t>(opt->step_count()));
    write_u32(out, static_cast<std::uint32_t>(opt->first_moments().size()));
    for (const auto& m : opt->first_moments()) write_doubles(out, m);
    for (const auto& v : opt->second_moments()) write_doubles(out, v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  CheckpointData ckpt;
  ckpt.version = read_string(in);
  if (ckpt.version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version '" + ckpt.version + "' in " + path);
  ckpt.config_text = read_string(in);
  const std::uint32_t n_meta = read_u32(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = read_string(in);
    ckpt.metadata[k] = read_string(in);
  }
  const std::uint32_t n_params = read_u32(in);
  ckpt.params.resize(n_params);
  for (auto& p : ckpt.params) {
    p.name = read_string(in);
    const std::uint32_t rank = read_u32(in);
    p.dims.resize(rank);
    for (auto& d : p.dims) d = static_cast<int>(read_u32(in));
    p.data = read_doubles(in);
  }
  const std::uint32_t n_buffers = read_u32(in);
  ckpt.buffers.resize(n_buffers);
  for (auto& b : ckpt.buffers) {
    b.name = read_string(in);
    const std::uint32_t rank = read_u32(in);
    b.dims.resize(rank);
    for (auto& d : b.dims) d = static_cast<int>(read_u32(in));
    b.data = read_doubles(in);
  }
  ckpt.has_optimizer = read_u32(in) != 0;
  if (ckpt.has_optimizer) {
    ckpt.optimizer_step = static_cast<std::int64_t>(read_u64(in));
    const std::uint32_t n = read_u32(in);
    ckpt.adam_m.resize(n);
    for (auto& m : ckpt.adam_m) m = read_doubles(in);
    ckpt.adam_v.resize(n);
    for (auto& v : ckpt.adam_v) v = read_doubles(in);
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return ckpt;
}

void restore_into(const CheckpointData& ckpt, nn::ParamStore& store, nn::Adam* optimizer) {
  // Name-matched restore: every live parameter must be found in the file;
  // extra file entries (e.g. fusion params when only evaluating) are ignored.
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& p : ckpt.params) by_name[p.name] = &p;
  for (auto& [name, t] : store.params()) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint is missing parameter: " + name);
    if (it->second->data.size() != t.values().size())
      throw std::runtime_error("checkpoint parameter size mismatch: " + name);
    t.values() = it->second->data;
  }
  std::map<std::string, const NamedArray*> buf_by_name;
  for (const auto& b : ckpt.buffers) buf_by_name[b.name] = &b;
  for (auto& [name, buf] : store.buffers()) {
    const auto it = buf_by_name.find(name);
    if (it == buf_by_name.end()) throw std::runtime_error("checkpoint is missing buffer: " + name);
    if (it->second->data.size() != buf->size())
      throw std::runtime_error("checkpoint buffer size mismatch: " + name);
    *buf = it->second->data;
  }
  if (optimizer != nullptr && ckpt.has_optimizer) {
    // Optimizer moments are positional; they only transfer between identical
    // registries (resume of the same run).
    if (ckpt.adam_m.size() != optimizer->first_moments().size() ||
        ckpt.params.size() != store.params().size())
      throw std::runtime_error("checkpoint optimizer state does not match the model");
    optimizer->set_step_count(ckpt.optimizer_step);
    optimizer->first_moments() = ckpt.adam_m;
    optimizer->second_moments() = ckpt.adam_v;
  }
}

}  // namespace seldkd::model
