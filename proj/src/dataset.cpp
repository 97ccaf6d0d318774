// SPDX-License-Identifier: Apache-2.0

#include "marble/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "marble/binary_io.hpp"
#include "marble/config.hpp"

namespace marble {

bool same_record(const SampleRecord& a, const SampleRecord& b) {
  if (a.sample_id != b.sample_id || a.noise_seed != b.noise_seed) return false;
  if (!(a.paths.target == b.paths.target)) return false;
  if (a.paths.paths.size() != b.paths.paths.size()) return false;
  for (std::size_t i = 0; i < a.paths.paths.size(); ++i) {
    const auto& p = a.paths.paths[i];
    const auto& q = b.paths.paths[i];
    if (p.kind != q.kind || p.chain != q.chain || p.delay != q.delay || p.azimuth != q.azimuth ||
        p.elevation != q.elevation || p.gain != q.gain)
      return false;
  }
  return true;
}

SplitBounds split_bounds(std::size_t n) {
  SplitBounds s;
  s.train_end = n * 8 / 10;
  s.val_end = s.train_end + n / 10;
  s.total = n;
  return s;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(stream_key(seed, 0, /*domain=*/5));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

SampleRecord generate_record(const Scene& scene, const GenerationConfig& cfg,
                             std::uint64_t master_seed, std::uint64_t index) {
  SampleRecord r;
  r.sample_id = index;
  r.noise_seed = stream_key(master_seed, index, /*domain=*/4);
  const Vec3 pos = sample_position(master_seed, index, cfg.region);
  SolverOptions opts;
  opts.max_depth = cfg.max_depth;
  opts.f0_hz = cfg.physics.grid.f0;
  r.paths = solve_paths(scene, pos, opts);
  for (auto& p : r.paths.paths) p.vertices.clear();
  return r;
}

std::vector<SampleRecord> generate_records(const GenerationConfig& cfg, std::size_t count,
                                           std::uint64_t master_seed) {
  const Scene scene = build_scene(cfg.scene_id, cfg.facet_deg, cfg.physics.grid.f0);
  std::vector<SampleRecord> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = generate_record(scene, cfg, master_seed, i);
  return out;
}

std::span<const std::size_t> Dataset::train() const {
  return std::span(order).subspan(0, manifest.splits.train_end);
}
std::span<const std::size_t> Dataset::val() const {
  return std::span(order).subspan(manifest.splits.train_end,
                                  manifest.splits.val_end - manifest.splits.train_end);
}
std::span<const std::size_t> Dataset::test() const {
  return std::span(order).subspan(manifest.splits.val_end,
                                  manifest.splits.total - manifest.splits.val_end);
}

std::vector<SampleRecord> Dataset::gather(std::span<const std::size_t> idx) const {
  std::vector<SampleRecord> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(records.at(i));
  return out;
}

Dataset make_dataset(const GenerationConfig& cfg, std::size_t count, std::uint64_t master_seed) {
  if (count < 1) throw std::invalid_argument("dataset needs at least one sample");
  Dataset ds;
  ds.records = generate_records(cfg, count, master_seed);
  Manifest& m = ds.manifest;
  m.scene_id = cfg.scene_id;
  m.facet_deg = cfg.facet_deg;
  m.region = cfg.region;
  m.sample_count = count;
  m.physics = cfg.physics;
  m.master_seed = master_seed;
  m.split_seed = stream_key(master_seed, 0, /*domain=*/6);
  m.splits = split_bounds(count);
  ds.order = shuffled_indices(count, m.split_seed);
  return ds;
}

void write_records(std::ostream& os, std::span<const SampleRecord> records) {
  os.write("MRBL", 4);
  io::put<std::uint32_t>(os, kRecordsVersion);
  io::put<std::uint64_t>(os, records.size());
  for (const SampleRecord& r : records) {
    io::put<std::uint64_t>(os, r.sample_id);
    io::put<std::uint64_t>(os, r.noise_seed);
    io::put<double>(os, r.paths.target.x);
    io::put<double>(os, r.paths.target.y);
    io::put<double>(os, r.paths.target.z);
    io::put<std::uint32_t>(os, static_cast<std::uint32_t>(r.paths.paths.size()));
    for (const PropagationPath& p : r.paths.paths) {
      io::put<std::uint8_t>(os, static_cast<std::uint8_t>(p.kind));
      io::put<std::uint32_t>(os, p.chain[0]);
      io::put<std::uint32_t>(os, p.chain[1]);
      io::put<double>(os, p.delay);
      io::put<double>(os, p.azimuth);
      io::put<double>(os, p.elevation);
      io::put<double>(os, p.gain.real());
      io::put<double>(os, p.gain.imag());
    }
  }
}

std::vector<SampleRecord> read_records(std::istream& is, std::uint64_t expected_count) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "MRBL")
    throw std::runtime_error("records file: bad magic header");
  const auto version = io::get<std::uint32_t>(is, "records version");
  if (version != kRecordsVersion)
    throw std::runtime_error("records file: unsupported version " + std::to_string(version));
  const auto count = io::get<std::uint64_t>(is, "record count");
  if (count != expected_count)
    throw std::runtime_error("records file holds " + std::to_string(count) +
                             " records, manifest says " + std::to_string(expected_count));
  std::vector<SampleRecord> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto fail = [i](const char* what) {
      return std::runtime_error("record " + std::to_string(i) + ": " + what);
    };
    SampleRecord r;
    std::uint32_t n_paths = 0;
    if (!io::try_get(is, r.sample_id) || !io::try_get(is, r.noise_seed) ||
        !io::try_get(is, r.paths.target.x) || !io::try_get(is, r.paths.target.y) ||
        !io::try_get(is, r.paths.target.z) || !io::try_get(is, n_paths))
      throw fail("truncated header");
    if (n_paths > 100000) throw fail("implausible path count");
    r.paths.paths.resize(n_paths);
    for (auto& p : r.paths.paths) {
      std::uint8_t kind = 0;
      double re = 0.0, im = 0.0;
      if (!io::try_get(is, kind) || !io::try_get(is, p.chain[0]) || !io::try_get(is, p.chain[1]) ||
          !io::try_get(is, p.delay) || !io::try_get(is, p.azimuth) ||
          !io::try_get(is, p.elevation) || !io::try_get(is, re) || !io::try_get(is, im))
        throw fail("truncated path list");
      if (kind > 2) throw fail("invalid path kind");
      p.kind = static_cast<PathKind>(kind);
      p.gain = {re, im};
      p.length = p.delay * kSpeedOfLight;
    }
    out.push_back(std::move(r));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("records file: trailing bytes after record " + std::to_string(count));
  return out;
}

std::string validate_path(const PropagationPath& p, const Scene& scene, double f0_hz) {
  if (!std::isfinite(p.delay) || !(p.delay > 0.0)) return "non-positive delay";
  if (!std::isfinite(p.azimuth) || !std::isfinite(p.elevation)) return "non-finite direction";
  if (!std::isfinite(p.gain.real()) || !std::isfinite(p.gain.imag())) return "non-finite gain";
  const int bounces = static_cast<int>(p.kind);
  for (int k = 0; k < 2; ++k) {
    const bool used = k < bounces;
    if (used != (p.chain[k] != kNoReflector)) return "reflector chain does not match path kind";
    if (used && p.chain[k] >= scene.reflectors.size()) return "unknown reflector id";
  }
  if (bounces == 2 && p.chain[0] == p.chain[1]) return "repeated reflector in chain";
  const double length = p.delay * kSpeedOfLight;
  const double free_space = kSpeedOfLight / f0_hz / (4.0 * kPi * length);
  if (std::abs(p.gain) > free_space * (1.0 + 1e-9)) return "gain exceeds free-space amplitude";
  if (p.kind == PathKind::los && (p.gain.imag() != 0.0 || !(p.gain.real() > 0.0)))
    return "LoS gain must be real positive";
  return {};
}

namespace {

json manifest_to_json(const Manifest& m) {
  json j;
  j["format_version"] = m.format_version;
  j["scene_id"] = std::string(to_string(m.scene_id));
  j["facet_deg"] = m.facet_deg;
  j["region"] = to_json(m.region);
  j["sample_count"] = m.sample_count;
  j["physics"] = to_json(m.physics);
  j["master_seed"] = m.master_seed;
  j["split_seed"] = m.split_seed;
  j["splits"] = {{"train", m.splits.train_end},
                 {"val", m.splits.val_end - m.splits.train_end},
                 {"test", m.splits.total - m.splits.val_end}};
  j["records_checksum"] = m.records_checksum;
  return j;
}

Manifest manifest_from_json(const json& j) {
  Manifest m;
  m.format_version = j.at("format_version").get<std::uint32_t>();
  if (m.format_version != 1)
    throw std::runtime_error("manifest: unsupported format_version " + std::to_string(m.format_version));
  m.scene_id = parse_scene_id(j.at("scene_id").get<std::string>());
  m.facet_deg = j.at("facet_deg").get<double>();
  m.region = region_from_json(j.at("region"));
  m.sample_count = j.at("sample_count").get<std::uint64_t>();
  m.physics = physics_from_json(j.at("physics"));
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.split_seed = j.at("split_seed").get<std::uint64_t>();
  m.splits = split_bounds(m.sample_count);
  const auto& s = j.at("splits");
  if (s.at("train").get<std::size_t>() != m.splits.train_end ||
      s.at("val").get<std::size_t>() != m.splits.val_end - m.splits.train_end ||
      s.at("test").get<std::size_t>() != m.splits.total - m.splits.val_end)
    throw std::runtime_error("manifest: split sizes do not follow the 80/10/10 rule");
  m.records_checksum = j.at("records_checksum").get<std::uint64_t>();
  return m;
}

}  // namespace

void save_dataset(Dataset& ds, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ostringstream buf(std::ios::binary);
  write_records(buf, ds.records);
  const std::string bytes = buf.str();
  ds.manifest.records_checksum = io::fnv1a64(bytes.data(), bytes.size());
  {
    std::ofstream out(out_dir / "records.bin", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + (out_dir / "records.bin").string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + (out_dir / "records.bin").string());
  }
  std::ofstream mf(out_dir / "manifest.json", std::ios::trunc);
  if (!mf) throw std::runtime_error("cannot write " + (out_dir / "manifest.json").string());
  mf << manifest_to_json(ds.manifest).dump(2) << '\n';
}

void generate_dataset(const GenerationConfig& cfg, std::size_t count, std::uint64_t master_seed,
                      const std::filesystem::path& out_dir) {
  Dataset ds = make_dataset(cfg, count, master_seed);
  save_dataset(ds, out_dir);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  try {
    ds.manifest = manifest_from_json(load_json_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw std::runtime_error((dir / "manifest.json").string() + ": " + e.what());
  }
  std::ifstream in(dir / "records.bin", std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + (dir / "records.bin").string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream is(bytes, std::ios::binary);
  ds.records = read_records(is, ds.manifest.sample_count);

  const Scene scene = build_scene(ds.manifest.scene_id, ds.manifest.facet_deg, ds.manifest.physics.grid.f0);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const SampleRecord& r = ds.records[i];
    if (r.sample_id != i)
      throw std::runtime_error("record " + std::to_string(i) + ": sample_id out of sequence");
    std::set<std::array<std::uint32_t, 2>> chains;
    for (const auto& p : r.paths.paths) {
      if (const std::string err = validate_path(p, scene, ds.manifest.physics.grid.f0); !err.empty())
        throw std::runtime_error("record " + std::to_string(i) + ": " + err);
      if (!chains.insert(p.chain).second)
        throw std::runtime_error("record " + std::to_string(i) + ": duplicate reflector chain");
    }
  }
  if (io::fnv1a64(bytes.data(), bytes.size()) != ds.manifest.records_checksum)
    throw std::runtime_error("records.bin checksum does not match the manifest");
  ds.order = shuffled_indices(ds.records.size(), ds.manifest.split_seed);
  return ds;
}

}  // namespace marble
