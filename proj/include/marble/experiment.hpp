// SPDX-License-Identifier: Apache-2.0
//
// End-to-end pipelines shared by the command-line tool and the acceptance
// suite: train a model on a dataset's splits, evaluate it, build k-NN.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "marble/dataset.hpp"
#include "marble/knn.hpp"
#include "marble/metrics.hpp"
#include "marble/models.hpp"
#include "marble/training.hpp"

namespace marble {

struct SplitRecords {
  std::vector<SampleRecord> train, val, test;
};

SplitRecords split_records(const Dataset& ds);

enum class TrainMode : std::uint8_t { fixed, adaptive };
TrainMode parse_train_mode(std::string_view name);

struct TrainedModel {
  LocalizationModel model;
  std::vector<StageReport> reports;
};

/// Builds the model, fits input normalization under the initial beam and
/// runs the schedule (stage 1 only for fixed mode).
TrainedModel train_model(ModelKind kind, const SplitRecords& data, const SystemConfig& sys,
                         std::span<const StageConfig> schedule, std::uint64_t seed);

std::vector<StageConfig> schedule_for(TrainMode mode);

std::vector<Point2> predict_all(const LocalizationModel& model, std::span<const SampleRecord> samples,
                                const SystemConfig& sys);
std::vector<Point2> knn_predict_all(const Codebook& book, std::span<const SampleRecord> samples,
                                    const SystemConfig& sys, int K);
std::vector<Point2> truths(std::span<const SampleRecord> samples);

}  // namespace marble
