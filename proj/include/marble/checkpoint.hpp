// SPDX-License-Identifier: Apache-2.0
//
// Model checkpoint: "MRBC", u32 version, model kind, grid/array geometry,
// normalization scalars, layer specs, parameter blocks (row-major weights
// then bias, little-endian f64) and the beamformer state.

#pragma once

#include <filesystem>
#include <iosfwd>

#include "marble/models.hpp"

namespace marble {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  LocalizationModel model;
  FrequencyGrid grid;
  ArrayConfig array;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace marble
