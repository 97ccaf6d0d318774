// SPDX-License-Identifier: Apache-2.0

#include "marble/training.hpp"

#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "marble/dataset.hpp"

namespace marble {

StageConfig StageConfig::defaults(int stage) {
  StageConfig c;
  c.stage = stage;
  c.batch_size = 64;
  switch (stage) {
    case 1:
      c.epochs = 40;
      c.lr_network = 1e-3;
      c.trainable = Trainable::network_only;
      break;
    case 2:
      c.epochs = 20;
      c.lr_network = 0.0;
      c.lr_beamformer = 1e-2;
      c.trainable = Trainable::beamformer_only;
      break;
    case 3:
      c.epochs = 20;
      c.lr_network = 1e-4;
      c.lr_beamformer = 1e-4;
      c.trainable = Trainable::all;
      break;
    default:
      throw std::invalid_argument("stage must be 1, 2 or 3");
  }
  return c;
}

void StageConfig::validate() const {
  const Trainable expected = stage == 1   ? Trainable::network_only
                             : stage == 2 ? Trainable::beamformer_only
                             : stage == 3 ? Trainable::all
                                          : throw std::invalid_argument("stage must be 1, 2 or 3");
  if (trainable != expected)
    throw std::invalid_argument("stage " + std::to_string(stage) + " has the wrong trainable set");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
}

std::vector<StageConfig> fixed_schedule() { return {StageConfig::defaults(1)}; }

std::vector<StageConfig> adaptive_schedule() {
  return {StageConfig::defaults(1), StageConfig::defaults(2), StageConfig::defaults(3)};
}

namespace {

constexpr int kEvalChunk = 256;

// Noise realization for a training epoch; never collides with evaluation.
std::uint64_t training_noise_epoch(int stage, int epoch) {
  return (static_cast<std::uint64_t>(stage) << 32) | static_cast<std::uint64_t>(epoch);
}

struct FeatureBatch {
  Eigen::MatrixXd rows;  // batch x M, normalized
  Eigen::MatrixXd targets;  // 2 x batch, scaled by d_max
  std::vector<SpectrumCache> caches;
};

class SpectrumSource {
 public:
  SpectrumSource(const SystemConfig& sys, std::span<const SampleRecord> samples)
      : sys_(sys), samples_(samples) {}

  // Caches noiseless received signals under a frozen beam.
  void freeze(const BeamformerParams& beam) {
    const Combiner comb = make_combiner(beam, sys_.grid, sys_.array);
    clean_.clear();
    clean_.reserve(samples_.size());
    for (const SampleRecord& r : samples_)
      clean_.push_back(noiseless_signal(comb, r.paths, sys_.phys, sys_.grid, sys_.array));
  }
  bool frozen() const { return !clean_.empty(); }

  void fill(const LocalizationModel& model, const Combiner* comb, std::span<const std::size_t> idx,
            std::uint64_t noise_epoch, FeatureBatch& out, bool keep_caches) const {
    const int M = sys_.grid.M;
    const int B = static_cast<int>(idx.size());
    out.rows.resize(B, M);
    out.targets.resize(2, B);
    if (keep_caches) out.caches.resize(static_cast<std::size_t>(B));
    const double inv = 1.0 / model.feature_std;
    std::vector<cdouble> y(static_cast<std::size_t>(M));
    for (int b = 0; b < B; ++b) {
      const SampleRecord& r = samples_[idx[b]];
      const auto noise = noise_vector(r.noise_seed, noise_epoch, sys_.phys.noise_power_mw, M);
      std::vector<double> p_db;
      if (frozen()) {
        const auto& clean = clean_[idx[b]];
        for (int m = 0; m < M; ++m) y[m] = clean[m] + noise[m];
        p_db = log_power(y, sys_.phys.epsilon);
      } else {
        SpectrumCache* cache = keep_caches ? &out.caches[b] : nullptr;
        p_db = received_spectrum(*comb, r.paths, sys_.phys, sys_.grid, sys_.array, noise, cache).p_db;
      }
      for (int m = 0; m < M; ++m) out.rows(b, m) = (p_db[m] - model.feature_mean) * inv;
      out.targets(0, b) = r.position().x / model.d_max;
      out.targets(1, b) = r.position().y / model.d_max;
    }
  }

 private:
  const SystemConfig& sys_;
  std::span<const SampleRecord> samples_;
  std::vector<std::vector<cdouble>> clean_;
};

double mean_loss(const LocalizationModel& model, const SpectrumSource& src, std::size_t n,
                 const SystemConfig& sys) {
  if (n == 0) return 0.0;
  const Combiner comb = make_combiner(model.beam, sys.grid, sys.array);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  double total = 0.0;
  FeatureBatch batch;
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t len = std::min<std::size_t>(kEvalChunk, n - start);
    src.fill(model, &comb, std::span(idx).subspan(start, len), kEvalNoiseEpoch, batch, false);
    const nn::Tensor out = nn::forward(model.net, nn::Tensor::from_rows(batch.rows));
    total += (out.data - batch.targets).squaredNorm() / 2.0;
  }
  return total / static_cast<double>(n);
}

}  // namespace

double validation_loss(const LocalizationModel& model, std::span<const SampleRecord> samples,
                       const SystemConfig& sys) {
  SpectrumSource src(sys, samples);
  return mean_loss(model, src, samples.size(), sys);
}

StageReport train_stage(LocalizationModel& model, std::span<const SampleRecord> train,
                        std::span<const SampleRecord> val, const SystemConfig& sys,
                        const StageConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("training set is empty");
  if (val.empty()) throw std::invalid_argument("validation set is empty");

  const bool train_net = cfg.trainable != Trainable::beamformer_only;
  const bool train_beam = cfg.trainable != Trainable::network_only;

  SpectrumSource train_src(sys, train);
  SpectrumSource val_src(sys, val);
  if (!train_beam) {
    train_src.freeze(model.beam);
    val_src.freeze(model.beam);
  }

  StageReport report;
  report.stage = cfg.stage;
  report.best_val_loss = mean_loss(model, val_src, val.size(), sys);
  report.best_epoch = 0;
  report.rows.push_back({cfg.stage, 0, std::numeric_limits<double>::quiet_NaN(), report.best_val_loss});
  nn::Network best_net = model.net;
  BeamformerParams best_beam = model.beam;

  nn::AdamState net_opt, beam_opt;
  nn::Gradients net_grads;
  BeamformerGrad beam_grads;
  const int N = sys.array.N_r;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  FeatureBatch batch;
  nn::ForwardCache fwd;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    {
      Rng rng(stream_key(seed, training_noise_epoch(cfg.stage, epoch), /*domain=*/7));
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    }
    const std::uint64_t noise_epoch = training_noise_epoch(cfg.stage, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      const auto idx = std::span<const std::size_t>(order).subspan(start, len);

      Combiner comb;
      if (train_beam) comb = make_combiner(model.beam, sys.grid, sys.array);
      train_src.fill(model, &comb, idx, noise_epoch, batch, train_beam);

      const nn::Tensor out = nn::forward(model.net, nn::Tensor::from_rows(batch.rows), &fwd);
      const nn::MseResult mse = nn::mse_loss(out.data, batch.targets);
      epoch_loss += mse.loss * static_cast<double>(len);

      nn::Tensor grad_out = out;
      grad_out.data = mse.grad;
      if (train_net) net_grads.zero_like(model.net);
      const nn::Tensor d_in = nn::backward(model.net, fwd, grad_out, train_net ? &net_grads : nullptr,
                                           {.param_grads = train_net, .input_grad = train_beam});

      if (train_beam) {
        beam_grads.d_phi = Eigen::VectorXd::Zero(N);
        beam_grads.d_tau_tilde = Eigen::VectorXd::Zero(N);
        const double inv = 1.0 / model.feature_std;
        const int M = sys.grid.M;
        std::vector<double> d_p(static_cast<std::size_t>(M));
        for (std::size_t b = 0; b < len; ++b) {
          for (int m = 0; m < M; ++m) d_p[m] = d_in.data(0, static_cast<Eigen::Index>(b) * M + m) * inv;
          backward_params(batch.caches[b], d_p, sys.grid, beam_grads);
        }
      }

      if (train_net) {
        const auto views = nn::param_views(model.net, net_grads);
        nn::adam_step(views, net_opt, cfg.lr_network);
      }
      if (train_beam) {
        const std::array<nn::ParamView, 2> views{
            nn::ParamView{{model.beam.phi.data(), static_cast<std::size_t>(N)},
                          {beam_grads.d_phi.data(), static_cast<std::size_t>(N)}},
            nn::ParamView{{model.beam.tau_tilde.data(), static_cast<std::size_t>(N)},
                          {beam_grads.d_tau_tilde.data(), static_cast<std::size_t>(N)}}};
        nn::adam_step(views, beam_opt, cfg.lr_beamformer);
      }
    }
    const double val_loss = mean_loss(model, val_src, val.size(), sys);
    report.rows.push_back({cfg.stage, epoch, epoch_loss / static_cast<double>(train.size()), val_loss});
    if (val_loss < report.best_val_loss) {
      report.best_val_loss = val_loss;
      report.best_epoch = epoch;
      best_net = model.net;
      best_beam = model.beam;
    }
  }
  model.net = std::move(best_net);
  model.beam = std::move(best_beam);
  return report;
}

std::vector<StageReport> run_multistage(LocalizationModel& model,
                                        std::span<const SampleRecord> train,
                                        std::span<const SampleRecord> val, const SystemConfig& sys,
                                        std::span<const StageConfig> schedule, std::uint64_t seed) {
  if (schedule.empty() || schedule.size() > 3) throw std::invalid_argument("schedule must hold 1 to 3 stages");
  for (std::size_t i = 0; i < schedule.size(); ++i)
    if (schedule[i].stage != static_cast<int>(i) + 1)
      throw std::invalid_argument("schedule must run stages in order 1, 2, 3");
  std::vector<StageReport> reports;
  for (const StageConfig& cfg : schedule)
    reports.push_back(train_stage(model, train, val, sys, cfg, stream_key(seed, cfg.stage, /*domain=*/8)));
  return reports;
}

void write_training_report(std::ostream& os, std::span<const StageReport> reports) {
  os << "stage,epoch,train_loss,val_loss\n";
  os << std::setprecision(17);
  for (const StageReport& r : reports)
    for (const EpochRow& row : r.rows) {
      os << row.stage << ',' << row.epoch << ',';
      if (std::isnan(row.train_loss)) os << "";
      else os << row.train_loss;
      os << ',' << row.val_loss << '\n';
    }
}

}  // namespace marble
