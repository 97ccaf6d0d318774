// SPDX-License-Identifier: Apache-2.0
//
// marble: dataset generation, training, evaluation and benchmarking.

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "marble/checkpoint.hpp"
#include "marble/config.hpp"
#include "marble/experiment.hpp"

using namespace marble;

namespace {

std::ofstream open_out(const std::string& path, const char* flag) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(std::string(flag) + ": cannot write '" + path + "'");
  return out;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(flag) + ": cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument(std::string(flag) + ": empty list");
  return out;
}

struct ScheduleOverrides {
  std::string epochs;  // "e1,e2,e3"
  int batch = 0;
};

std::vector<StageConfig> build_schedule(TrainMode mode, const ScheduleOverrides& o) {
  auto schedule = schedule_for(mode);
  if (!o.epochs.empty()) {
    const auto e = parse_list(o.epochs, "--epochs");
    for (std::size_t i = 0; i < schedule.size() && i < e.size(); ++i)
      schedule[i].epochs = static_cast<int>(e[i]);
  }
  if (o.batch > 0)
    for (auto& s : schedule) s.batch_size = o.batch;
  return schedule;
}

Dataset load_data(const std::string& dir) {
  try {
    return load_dataset(dir);
  } catch (const std::exception& e) {
    throw std::runtime_error("--data '" + dir + "': " + e.what());
  }
}

void check_geometry(const Checkpoint& ck, const SystemConfig& sys, const std::string& path) {
  if (ck.grid.M != sys.grid.M || ck.array.N_r != sys.array.N_r)
    throw std::runtime_error("--ckpt '" + path + "' was trained for a different grid/array than --data");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rainbow-beam localization: simulate, train, evaluate"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a dataset of path records");
  std::string gen_scene = "los", gen_config, gen_out;
  std::size_t gen_count = 1000;
  std::uint64_t gen_seed = 1;
  bool gen_desk = false;
  gen->add_option("--scene", gen_scene, "los | circle | rounded_l | l");
  gen->add_option("--count", gen_count)->required();
  gen->add_option("--seed", gen_seed);
  gen->add_option("--config", gen_config, "JSON experiment config");
  gen->add_flag("--desk-scale", gen_desk, "64 antennas, 256 subcarriers at 1.485 MHz");
  gen->add_option("--out", gen_out)->required();

  // train
  auto* train = app.add_subcommand("train", "Train MARBLE-Net or RaiNet");
  std::string tr_data, tr_model = "marble", tr_mode = "adaptive", tr_out, tr_report;
  std::uint64_t tr_seed = 1;
  std::optional<double> tr_power;
  ScheduleOverrides tr_sched;
  train->add_option("--data", tr_data)->required();
  train->add_option("--model", tr_model, "marble | rainet")->check(CLI::IsMember({"marble", "rainet"}));
  train->add_option("--mode", tr_mode, "fixed | adaptive")->check(CLI::IsMember({"fixed", "adaptive"}));
  train->add_option("--seed", tr_seed);
  train->add_option("--out", tr_out, "checkpoint path")->required();
  train->add_option("--report", tr_report, "training CSV");
  train->add_option("--power-dbm", tr_power);
  train->add_option("--epochs", tr_sched.epochs, "per-stage epochs, e.g. 40,20,20");
  train->add_option("--batch", tr_sched.batch);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint or k-NN on the test split");
  std::string ev_data, ev_ckpt, ev_report, ev_cdf, ev_grid, ev_method;
  int ev_knn = 0;
  double ev_cell = 5.0;
  std::optional<double> ev_power;
  ev->add_option("--data", ev_data)->required();
  auto* ev_ck_opt = ev->add_option("--ckpt", ev_ckpt);
  auto* ev_knn_opt = ev->add_option("--knn", ev_knn, "k-NN with K neighbours");
  ev_ck_opt->excludes(ev_knn_opt);
  ev->add_option("--report", ev_report, "metrics CSV")->required();
  ev->add_option("--cdf", ev_cdf, "error CDF CSV");
  ev->add_option("--grid", ev_grid, "spatial error grid CSV");
  ev->add_option("--cell", ev_cell, "grid cell size, m");
  ev->add_option("--power-dbm", ev_power);
  ev->add_option("--method", ev_method, "label for the metrics row");

  // bench
  auto* bench = app.add_subcommand("bench", "Per-sample inference latency");
  std::string be_data, be_ckpt, be_report;
  int be_knn = kDefaultK;
  std::size_t be_warmup = 20;
  bench->add_option("--data", be_data)->required();
  bench->add_option("--ckpt", be_ckpt)->required();
  bench->add_option("--knn", be_knn);
  bench->add_option("--report", be_report)->required();
  bench->add_option("--warmup", be_warmup);

  // sweep-power
  auto* sweep = app.add_subcommand("sweep-power", "Retrain and evaluate per transmit power");
  std::string sw_data, sw_powers = "23,18,13", sw_model = "marble", sw_mode = "adaptive", sw_report;
  std::uint64_t sw_seed = 1;
  ScheduleOverrides sw_sched;
  sweep->add_option("--data", sw_data)->required();
  sweep->add_option("--powers", sw_powers);
  sweep->add_option("--model", sw_model)->check(CLI::IsMember({"marble", "rainet"}));
  sweep->add_option("--mode", sw_mode)->check(CLI::IsMember({"fixed", "adaptive"}));
  sweep->add_option("--seed", sw_seed);
  sweep->add_option("--report", sw_report)->required();
  sweep->add_option("--epochs", sw_sched.epochs);
  sweep->add_option("--batch", sw_sched.batch);

  // beam-pattern
  auto* bp = app.add_subcommand("beam-pattern", "Beam pattern of a checkpoint's beamformer");
  std::string bp_ckpt, bp_freqs, bp_out;
  double bp_step = 0.25;
  bool bp_initial = false;
  bp->add_option("--ckpt", bp_ckpt)->required();
  bp->add_option("--freqs", bp_freqs, "comma-separated frequencies in Hz (default: first/middle/last subcarrier)");
  bp->add_option("--out", bp_out)->required();
  bp->add_option("--step-deg", bp_step);
  bp->add_flag("--initial", bp_initial, "use the initial rainbow instead of the trained beam");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      GenerationConfig cfg;
      if (gen_desk) cfg.physics = desk_scale_physics();
      cfg.scene_id = parse_scene_id(gen_scene);
      if (!gen_config.empty()) {
        json j;
        try {
          j = load_json_file(gen_config);
          cfg = generation_config_from_json(j, cfg);
        } catch (const std::exception& e) {
          throw std::runtime_error(std::string("--config: ") + e.what());
        }
        if (j.contains("scene_id") && gen->count("--scene") && to_string(cfg.scene_id) != gen_scene)
          throw std::invalid_argument("--scene '" + gen_scene + "' conflicts with scene_id in --config");
      }
      if (gen_count < 1) throw std::invalid_argument("--count must be at least 1");
      generate_dataset(cfg, gen_count, gen_seed, gen_out);
      std::cout << "wrote " << gen_count << " records to " << gen_out << '\n';
    } else if (*train) {
      const Dataset ds = load_data(tr_data);
      const SystemConfig sys = make_system(ds.manifest.physics, tr_power);
      const auto kind = parse_model_kind(tr_model);
      const auto mode = parse_train_mode(tr_mode);
      const auto schedule = build_schedule(mode, tr_sched);
      const TrainedModel run = train_model(kind, split_records(ds), sys, schedule, tr_seed);
      save_checkpoint(tr_out, {run.model, sys.grid, sys.array});
      if (!tr_report.empty()) {
        auto out = open_out(tr_report, "--report");
        write_training_report(out, run.reports);
      }
      for (const auto& r : run.reports)
        std::cout << "stage " << r.stage << ": best val loss " << r.best_val_loss << " at epoch "
                  << r.best_epoch << '\n';
    } else if (*ev) {
      if (ev_ckpt.empty() && ev_knn <= 0) throw std::invalid_argument("eval needs --ckpt or --knn K");
      const Dataset ds = load_data(ev_data);
      const SystemConfig sys = make_system(ds.manifest.physics, ev_power);
      const SplitRecords data = split_records(ds);
      std::vector<Point2> preds;
      std::string method = ev_method;
      if (!ev_ckpt.empty()) {
        const Checkpoint ck = load_checkpoint(ev_ckpt);
        check_geometry(ck, sys, ev_ckpt);
        preds = predict_all(ck.model, data.test, sys);
        if (method.empty()) method = std::string(to_string(ck.model.kind));
      } else {
        const Codebook book = knn_build(data.train, initial_beam(sys), sys);
        preds = knn_predict_all(book, data.test, sys, ev_knn);
        if (method.empty()) method = "knn_k" + std::to_string(ev_knn);
      }
      const auto gt = truths(data.test);
      const MetricsReport rep = evaluate(preds, gt);
      const MetricsRow row{method, std::string(to_string(ds.manifest.scene_id)), sys.p_t_dbm,
                           rep.loc_rmse_m, rep.angle_rmse_deg, rep.range_rmse_m};
      {
        auto out = open_out(ev_report, "--report");
        write_metrics_csv(out, std::span(&row, 1));
      }
      std::vector<double> loc;
      for (const auto& e : rep.errors) loc.push_back(e.loc_m);
      if (!ev_cdf.empty()) {
        auto out = open_out(ev_cdf, "--cdf");
        write_cdf_csv(out, error_cdf(loc));
      }
      if (!ev_grid.empty()) {
        auto out = open_out(ev_grid, "--grid");
        write_grid_csv(out, spatial_error_grid(gt, loc, ev_cell));
      }
      std::cout << method << ": loc " << rep.loc_rmse_m << " m, angle " << rep.angle_rmse_deg
                << " deg, range " << rep.range_rmse_m << " m\n";
    } else if (*bench) {
      const Dataset ds = load_data(be_data);
      const SystemConfig sys = make_system(ds.manifest.physics);
      const SplitRecords data = split_records(ds);
      const Checkpoint ck = load_checkpoint(be_ckpt);
      check_geometry(ck, sys, be_ckpt);
      // Spectra are measured by the receiver; only the digital inference is timed.
      std::vector<std::vector<double>> dl_in, knn_in;
      for (const auto& r : data.test) {
        dl_in.push_back(record_spectrum(ck.model.beam, r, sys, kEvalNoiseEpoch));
        knn_in.push_back(record_spectrum(initial_beam(sys), r, sys, kEvalNoiseEpoch));
      }
      const Codebook book = knn_build(data.train, initial_beam(sys), sys);
      std::vector<BenchRow> rows;
      rows.push_back({std::string(to_string(ck.model.kind)),
                      bench_latency([&](std::size_t i) { return predict_from_spectrum(ck.model, dl_in[i]); },
                                    dl_in.size(), be_warmup)});
      rows.push_back({"knn_k" + std::to_string(be_knn),
                      bench_latency([&](std::size_t i) { return knn_predict(book, knn_in[i], be_knn); },
                                    knn_in.size(), be_warmup)});
      auto out = open_out(be_report, "--report");
      write_bench_csv(out, rows);
      for (const auto& r : rows)
        std::cout << r.method << ": mean " << r.stats.mean_ms << " ms, p50 " << r.stats.p50_ms
                  << " ms, p99 " << r.stats.p99_ms << " ms\n";
    } else if (*sweep) {
      const Dataset ds = load_data(sw_data);
      const SplitRecords data = split_records(ds);
      const auto kind = parse_model_kind(sw_model);
      const auto mode = parse_train_mode(sw_mode);
      const auto schedule = build_schedule(mode, sw_sched);
      std::vector<MetricsRow> rows;
      for (double p : parse_list(sw_powers, "--powers")) {
        const SystemConfig sys = make_system(ds.manifest.physics, p);
        const TrainedModel run = train_model(kind, data, sys, schedule, sw_seed);
        const MetricsReport rep = evaluate(predict_all(run.model, data.test, sys), truths(data.test));
        rows.push_back({std::string(to_string(kind)) + "_" + sw_mode,
                        std::string(to_string(ds.manifest.scene_id)), p, rep.loc_rmse_m,
                        rep.angle_rmse_deg, rep.range_rmse_m});
        std::cout << p << " dBm: loc " << rep.loc_rmse_m << " m\n";
      }
      auto out = open_out(sw_report, "--report");
      write_metrics_csv(out, rows);
    } else if (*bp) {
      const Checkpoint ck = load_checkpoint(bp_ckpt);
      SystemConfig sys;
      sys.grid = ck.grid;
      sys.array = ck.array;
      const BeamformerParams beam = bp_initial ? initial_beam(sys) : ck.model.beam;
      std::vector<double> freqs;
      if (bp_freqs.empty())
        freqs = {ck.grid.freq(0), ck.grid.freq(ck.grid.M / 2), ck.grid.freq(ck.grid.M - 1)};
      else
        freqs = parse_list(bp_freqs, "--freqs");
      if (!(bp_step > 0.0)) throw std::invalid_argument("--step-deg must be positive");
      std::vector<double> angles;
      for (double a = -90.0; a <= 90.0 + 1e-9; a += bp_step) angles.push_back(deg2rad(a));
      auto out = open_out(bp_out, "--out");
      out << "freq_hz,angle_deg,gain_db\n" << std::setprecision(17);
      for (double f : freqs) {
        const auto g = beam_pattern(beam, f, angles, ck.grid, ck.array);
        for (std::size_t i = 0; i < angles.size(); ++i)
          out << f << ',' << rad2deg(angles[i]) << ',' << g[i] << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
