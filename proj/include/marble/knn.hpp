// SPDX-License-Identifier: Apache-2.0
//
// Fingerprint k-NN baseline over spectra from the fixed initial rainbow.

#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "marble/models.hpp"

namespace marble {

struct Codebook {
  Eigen::MatrixXd spectra;  // M x entries, one codeword per column
  std::vector<std::array<double, 2>> positions;

  std::size_t size() const { return positions.size(); }
};

inline constexpr int kDefaultK = 5;

/// One codeword per training record: p_db under `beam` with evaluation noise.
Codebook knn_build(std::span<const SampleRecord> train, const BeamformerParams& beam,
                   const SystemConfig& sys);

/// Unweighted mean of the K nearest codeword positions (Euclidean distance,
/// ties to the lower index). Throws std::invalid_argument unless
/// 1 <= K <= size.
std::array<double, 2> knn_predict(const Codebook& book, std::span<const double> query, int K = kDefaultK);

}  // namespace marble
