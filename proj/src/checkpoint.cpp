// SPDX-License-Identifier: Apache-2.0

#include "marble/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "marble/binary_io.hpp"

namespace marble {

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  const LocalizationModel& m = ckpt.model;
  os.write("MRBC", 4);
  io::put<std::uint32_t>(os, kCheckpointVersion);
  io::put<std::uint8_t>(os, static_cast<std::uint8_t>(m.kind));
  io::put<double>(os, ckpt.grid.f0);
  io::put<double>(os, ckpt.grid.delta_f);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.grid.M));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.array.N_r));
  io::put<double>(os, ckpt.array.spacing_m);
  io::put<double>(os, m.feature_mean);
  io::put<double>(os, m.feature_std);
  io::put<double>(os, m.d_max);
  io::put<std::uint64_t>(os, m.net.init_seed);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(m.net.specs.size()));
  for (const nn::LayerSpec& s : m.net.specs) {
    io::put<std::uint8_t>(os, static_cast<std::uint8_t>(s.kind));
    for (int v : {s.in_channels, s.out_channels, s.kernel, s.stride, s.padding, s.in_dim, s.out_dim})
      io::put<std::int32_t>(os, v);
    io::put<std::uint8_t>(os, static_cast<std::uint8_t>(s.activation));
  }
  for (std::size_t i = 0; i < m.net.specs.size(); ++i) {
    if (!m.net.specs[i].has_params()) continue;
    const nn::LayerParams& p = m.net.params[i];
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) io::put<double>(os, p.weight(r, c));
    for (Eigen::Index r = 0; r < p.bias.size(); ++r) io::put<double>(os, p.bias[r]);
  }
  write_beamformer(os, m.beam);
}

Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "MRBC")
    throw std::runtime_error("checkpoint: bad magic header");
  const auto version = io::get<std::uint32_t>(is, "checkpoint version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint ck;
  LocalizationModel& m = ck.model;
  const auto kind = io::get<std::uint8_t>(is, "model kind");
  if (kind > 1) throw std::runtime_error("checkpoint: unknown model kind");
  m.kind = static_cast<ModelKind>(kind);
  ck.grid.f0 = io::get<double>(is, "f0");
  ck.grid.delta_f = io::get<double>(is, "delta_f");
  ck.grid.M = static_cast<int>(io::get<std::uint32_t>(is, "M"));
  ck.array.N_r = static_cast<int>(io::get<std::uint32_t>(is, "N_r"));
  ck.array.spacing_m = io::get<double>(is, "spacing");
  m.feature_mean = io::get<double>(is, "feature mean");
  m.feature_std = io::get<double>(is, "feature std");
  m.d_max = io::get<double>(is, "d_max");
  const auto seed = io::get<std::uint64_t>(is, "init seed");
  const auto n_layers = io::get<std::uint32_t>(is, "layer count");
  if (n_layers > 4096) throw std::runtime_error("checkpoint: implausible layer count");
  std::vector<nn::LayerSpec> specs(n_layers);
  for (auto& s : specs) {
    const auto k = io::get<std::uint8_t>(is, "layer kind");
    if (k > 2) throw std::runtime_error("checkpoint: unknown layer kind");
    s.kind = static_cast<nn::LayerKind>(k);
    int* fields[] = {&s.in_channels, &s.out_channels, &s.kernel, &s.stride, &s.padding, &s.in_dim, &s.out_dim};
    for (int* f : fields) *f = io::get<std::int32_t>(is, "layer field");
    const auto a = io::get<std::uint8_t>(is, "activation");
    if (a > 1) throw std::runtime_error("checkpoint: unknown activation");
    s.activation = static_cast<nn::Activation>(a);
  }
  nn::infer_shapes(specs, {1, ck.grid.M});
  m.net = nn::init_network(specs, seed);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!specs[i].has_params()) continue;
    nn::LayerParams& p = m.net.params[i];
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = io::get<double>(is, "weight");
    for (Eigen::Index r = 0; r < p.bias.size(); ++r) p.bias[r] = io::get<double>(is, "bias");
  }
  m.beam = read_beamformer(is);
  if (m.beam.size() != ck.array.N_r) throw std::runtime_error("checkpoint: beamformer size mismatch");
  if (is.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_checkpoint(out, ckpt);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace marble
