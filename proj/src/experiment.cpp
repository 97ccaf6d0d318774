// SPDX-License-Identifier: Apache-2.0

#include "marble/experiment.hpp"

#include <stdexcept>
#include <string>

namespace marble {

SplitRecords split_records(const Dataset& ds) {
  return {ds.gather(ds.train()), ds.gather(ds.val()), ds.gather(ds.test())};
}

TrainMode parse_train_mode(std::string_view name) {
  if (name == "fixed") return TrainMode::fixed;
  if (name == "adaptive") return TrainMode::adaptive;
  throw std::invalid_argument("unknown mode '" + std::string(name) + "'");
}

std::vector<StageConfig> schedule_for(TrainMode mode) {
  return mode == TrainMode::fixed ? fixed_schedule() : adaptive_schedule();
}

TrainedModel train_model(ModelKind kind, const SplitRecords& data, const SystemConfig& sys,
                         std::span<const StageConfig> schedule, std::uint64_t seed) {
  TrainedModel out;
  out.model = build_model(kind, sys, stream_key(seed, 0, /*domain=*/9));
  fit_normalization(out.model, data.train, sys);
  out.reports = run_multistage(out.model, data.train, data.val, sys, schedule, seed);
  return out;
}

std::vector<Point2> predict_all(const LocalizationModel& model, std::span<const SampleRecord> samples,
                                const SystemConfig& sys) {
  std::vector<Point2> out;
  out.reserve(samples.size());
  const Combiner comb = make_combiner(model.beam, sys.grid, sys.array);
  for (const SampleRecord& r : samples) {
    const auto noise = noise_vector(r.noise_seed, kEvalNoiseEpoch, sys.phys.noise_power_mw, sys.grid.M);
    const Spectrum s = received_spectrum(comb, r.paths, sys.phys, sys.grid, sys.array, noise);
    out.push_back(predict_from_spectrum(model, s.p_db));
  }
  return out;
}

std::vector<Point2> knn_predict_all(const Codebook& book, std::span<const SampleRecord> samples,
                                    const SystemConfig& sys, int K) {
  std::vector<Point2> out;
  out.reserve(samples.size());
  const Combiner comb = make_combiner(initial_beam(sys), sys.grid, sys.array);
  for (const SampleRecord& r : samples) {
    const auto noise = noise_vector(r.noise_seed, kEvalNoiseEpoch, sys.phys.noise_power_mw, sys.grid.M);
    const Spectrum s = received_spectrum(comb, r.paths, sys.phys, sys.grid, sys.array, noise);
    out.push_back(knn_predict(book, s.p_db, K));
  }
  return out;
}

std::vector<Point2> truths(std::span<const SampleRecord> samples) {
  std::vector<Point2> out;
  out.reserve(samples.size());
  for (const SampleRecord& r : samples) out.push_back({r.position().x, r.position().y});
  return out;
}

}  // namespace marble
