// SPDX-License-Identifier: Apache-2.0
//
// Datasets of (position, path set, noise seed) records. Paths are stored
// instead of channel matrices; spectra are recomputed on demand.
//
// On disk: <dir>/records.bin ("MRBL", u32 version, u64 count, records) and
// <dir>/manifest.json.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "marble/channel.hpp"
#include "marble/path_solver.hpp"
#include "marble/scene.hpp"

namespace marble {

struct SampleRecord {
  std::uint64_t sample_id = 0;
  std::uint64_t noise_seed = 0;
  PathSet paths;  // paths.target is the position; vertices are not stored

  const Vec3& position() const { return paths.target; }
};

bool same_record(const SampleRecord& a, const SampleRecord& b);

/// Everything needed to turn records into spectra.
struct PhysicsSnapshot {
  FrequencyGrid grid;
  ArrayConfig array;
  double p_t_dbm = 23.0;
  double noise_figure_db = 7.0;
  double epsilon = 1e-12;
};

struct SplitBounds {
  std::size_t train_end = 0;  // [0, train_end) of the shuffled order
  std::size_t val_end = 0;    // [train_end, val_end)
  std::size_t total = 0;      // [val_end, total)
};

/// 80/10/10 contiguous boundaries (train = floor(0.8 n), val = floor(0.1 n)).
SplitBounds split_bounds(std::size_t n);

/// Seeded Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

struct Manifest {
  std::uint32_t format_version = 1;
  SceneId scene_id = SceneId::los;
  double facet_deg = kDefaultFacetDeg;
  SamplingRegion region;
  std::uint64_t sample_count = 0;
  PhysicsSnapshot physics;
  std::uint64_t master_seed = 0;
  std::uint64_t split_seed = 0;
  SplitBounds splits;
  std::uint64_t records_checksum = 0;  // FNV-1a of records.bin
};

struct GenerationConfig {
  SceneId scene_id = SceneId::los;
  double facet_deg = kDefaultFacetDeg;
  SamplingRegion region;
  PhysicsSnapshot physics;
  int max_depth = 2;
};

/// Record i is a pure function of (config, master_seed, i).
SampleRecord generate_record(const Scene& scene, const GenerationConfig& cfg,
                             std::uint64_t master_seed, std::uint64_t index);

std::vector<SampleRecord> generate_records(const GenerationConfig& cfg, std::size_t count,
                                           std::uint64_t master_seed);

struct Dataset {
  Manifest manifest;
  std::vector<SampleRecord> records;
  std::vector<std::size_t> order;  // shuffled record indices

  std::span<const std::size_t> train() const;
  std::span<const std::size_t> val() const;
  std::span<const std::size_t> test() const;

  std::vector<SampleRecord> gather(std::span<const std::size_t> idx) const;
};

/// Builds a dataset in memory (manifest filled, checksum left zero).
Dataset make_dataset(const GenerationConfig& cfg, std::size_t count, std::uint64_t master_seed);

/// Writes manifest.json and records.bin under out_dir (created if missing).
void generate_dataset(const GenerationConfig& cfg, std::size_t count, std::uint64_t master_seed,
                      const std::filesystem::path& out_dir);
void save_dataset(Dataset& ds, const std::filesystem::path& out_dir);

/// Re-validates every record; throws std::runtime_error naming the
/// offending record index.
Dataset load_dataset(const std::filesystem::path& dir);

void write_records(std::ostream& os, std::span<const SampleRecord> records);
std::vector<SampleRecord> read_records(std::istream& is, std::uint64_t expected_count);

/// Structural and physical checks on one stored path (delay, gain bound,
/// chain ids, kind/chain consistency). Returns an empty string when valid.
std::string validate_path(const PropagationPath& p, const Scene& scene, double f0_hz);

inline constexpr std::uint32_t kRecordsVersion = 1;

}  // namespace marble
