// SPDX-License-Identifier: Apache-2.0

#include "marble/knn.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

namespace marble {

Codebook knn_build(std::span<const SampleRecord> train, const BeamformerParams& beam,
                   const SystemConfig& sys) {
  Codebook book;
  book.spectra.resize(sys.grid.M, static_cast<Eigen::Index>(train.size()));
  book.positions.reserve(train.size());
  const Combiner comb = make_combiner(beam, sys.grid, sys.array);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const SampleRecord& r = train[i];
    const auto noise = noise_vector(r.noise_seed, kEvalNoiseEpoch, sys.phys.noise_power_mw, sys.grid.M);
    const Spectrum s = received_spectrum(comb, r.paths, sys.phys, sys.grid, sys.array, noise);
    book.spectra.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(s.p_db.data(), sys.grid.M);
    book.positions.push_back({r.position().x, r.position().y});
  }
  return book;
}

std::array<double, 2> knn_predict(const Codebook& book, std::span<const double> query, int K) {
  if (K < 1 || static_cast<std::size_t>(K) > book.size())
    throw std::invalid_argument("K = " + std::to_string(K) + " outside [1, " +
                                std::to_string(book.size()) + "]");
  if (static_cast<Eigen::Index>(query.size()) != book.spectra.rows())
    throw std::invalid_argument("query length does not match codebook spectra");
  const Eigen::Map<const Eigen::VectorXd> q(query.data(), static_cast<Eigen::Index>(query.size()));
  std::vector<std::pair<double, std::size_t>> dist(book.size());
  for (std::size_t i = 0; i < book.size(); ++i)
    dist[i] = {(book.spectra.col(static_cast<Eigen::Index>(i)) - q).squaredNorm(), i};
  std::partial_sort(dist.begin(), dist.begin() + K, dist.end());
  double x = 0.0, y = 0.0;
  for (int k = 0; k < K; ++k) {
    x += book.positions[dist[k].second][0];
    y += book.positions[dist[k].second][1];
  }
  return {x / K, y / K};
}

}  // namespace marble
