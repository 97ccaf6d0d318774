// SPDX-License-Identifier: Apache-2.0
//
// Three-stage schedule: network pre-training under the fixed rainbow,
// beamformer adaptation with the network frozen, then joint fine-tuning.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "marble/models.hpp"

namespace marble {

enum class Trainable : std::uint8_t { network_only, beamformer_only, all };

struct StageConfig {
  int stage = 1;
  int epochs = 40;
  int batch_size = 64;
  double lr_network = 1e-3;
  double lr_beamformer = 0.0;
  Trainable trainable = Trainable::network_only;

  /// Desk-scale defaults: 40/20/20 epochs, batch 64, lr 1e-3 / 1e-2 / 1e-4.
  static StageConfig defaults(int stage);
  void validate() const;
};

std::vector<StageConfig> fixed_schedule();     // stage 1 only
std::vector<StageConfig> adaptive_schedule();  // stages 1, 2, 3

struct EpochRow {
  int stage = 0;
  int epoch = 0;  // 0 is the pre-training validation probe
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct StageReport {
  int stage = 0;
  std::vector<EpochRow> rows;
  double best_val_loss = 0.0;
  int best_epoch = 0;
};

/// Trains the parameters selected by cfg.trainable. Epoch order and batch
/// composition are deterministic in seed; each epoch draws a fresh noise
/// realization. The model ends at the best-validation checkpoint (epoch 0,
/// the starting point, included).
StageReport train_stage(LocalizationModel& model, std::span<const SampleRecord> train,
                        std::span<const SampleRecord> val, const SystemConfig& sys,
                        const StageConfig& cfg, std::uint64_t seed);

/// Runs stages in order; the schedule must be a prefix of 1, 2, 3.
std::vector<StageReport> run_multistage(LocalizationModel& model,
                                        std::span<const SampleRecord> train,
                                        std::span<const SampleRecord> val, const SystemConfig& sys,
                                        std::span<const StageConfig> schedule, std::uint64_t seed);

/// Mean per-sample MSE on coordinates scaled by d_max, evaluation noise.
double validation_loss(const LocalizationModel& model, std::span<const SampleRecord> samples,
                       const SystemConfig& sys);

/// CSV: stage,epoch,train_loss,val_loss
void write_training_report(std::ostream& os, std::span<const StageReport> reports);

}  // namespace marble
