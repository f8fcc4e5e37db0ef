#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "volt4d/adam.hpp"
#include "volt4d/checkpoint.hpp"
#include "volt4d/metrics.hpp"
#include "volt4d/parallel.hpp"
#include "volt4d/synthgen.hpp"
#include "volt4d/zoo.hpp"

namespace volt4d {

struct TrainConfig {
  std::size_t epochs = 400;
  std::size_t batch_size = 8;
  AdamHyper adam;
  std::uint64_t seed = 1;
  std::size_t patience = 0;   // 0 disables early stopping
  std::size_t max_steps = 0;  // 0: no cap on optimizer steps
  std::size_t threads = 1;
  std::filesystem::path out_dir;  // empty: no files written
  std::ostream* log = nullptr;

  void validate() const {
    if (epochs == 0) fail(ErrorKind::Config, "epochs must be >= 1");
    if (batch_size == 0) fail(ErrorKind::Config, "batch_size must be >= 1");
    if (!(adam.lr >= 0.0)) fail(ErrorKind::Config, "learning rate must be >= 0");
  }

  void write(KeyValues& kv, const std::string& prefix) const {
    kv.set(prefix + "epochs", std::to_string(epochs));
    kv.set(prefix + "batch_size", std::to_string(batch_size));
    kv.set(prefix + "lr", format_double(adam.lr));
    kv.set(prefix + "beta1", format_double(adam.beta1));
    kv.set(prefix + "beta2", format_double(adam.beta2));
    kv.set(prefix + "epsilon", format_double(adam.epsilon));
    kv.set(prefix + "seed", std::to_string(seed));
    kv.set(prefix + "patience", std::to_string(patience));
    kv.set(prefix + "max_steps", std::to_string(max_steps));
  }

  void read(const KeyValues& kv, const std::string& prefix) {
    auto num = [&](const char* k, std::size_t& dst) {
      if (kv.has(prefix + k)) dst = parse_number<std::size_t>(kv.get(prefix + k), k);
    };
    auto real = [&](const char* k, double& dst) {
      if (kv.has(prefix + k)) dst = parse_number<double>(kv.get(prefix + k), k);
    };
    num("epochs", epochs);
    num("batch_size", batch_size);
    real("lr", adam.lr);
    real("beta1", adam.beta1);
    real("beta2", adam.beta2);
    real("epsilon", adam.epsilon);
    if (kv.has(prefix + "seed")) seed = parse_number<std::uint64_t>(kv.get(prefix + "seed"), "seed");
    num("patience", patience);
    num("max_steps", max_steps);
  }
};

struct HistoryEntry {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;      // mean over the three horizons, mm; NaN without a validation split
  double val_mae_now = 0.0;  // mm
  double wall_seconds = 0.0;
};

struct History {
  std::vector<HistoryEntry> entries;

  std::string to_csv() const {
    std::ostringstream os;
    os << "epoch,steps,train_loss_mm2,val_mae_mm,val_mae_now_mm,wall_s\n";
    for (const auto& e : entries)
      os << e.epoch << ',' << e.steps << ',' << format_double(e.train_loss) << ',' << format_double(e.val_mae) << ','
         << format_double(e.val_mae_now) << ',' << format_double(e.wall_seconds) << '\n';
    return os.str();
  }
};

struct TrainResult {
  Model final_model;
  Model best_model;  // lowest validation MAE (or train loss without a validation split)
  History history;
  std::size_t steps = 0;
};

using Predictor = std::function<MotionPrediction(const VolumeSequence&)>;

inline std::vector<MotionPrediction> predict_all(const Model& model, std::span<const Sample> samples,
                                                 std::size_t threads) {
  std::vector<MotionPrediction> out(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) { out[i] = model.predict(samples[i].sequence); });
  return out;
}

inline std::vector<MotionLabels> labels_of(std::span<const Sample> samples) {
  std::vector<MotionLabels> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.labels);
  return out;
}

namespace detail {

inline double mean_horizon_mae(std::span<const MotionPrediction> preds, std::span<const MotionLabels> labels,
                               double* now) {
  const double m0 = mae_metric(preds, labels, Horizon::Now).mean;
  const double m1 = mae_metric(preds, labels, Horizon::Plus1).mean;
  const double m2 = mae_metric(preds, labels, Horizon::Plus2).mean;
  if (now) *now = m0;
  return (m0 + m1 + m2) / 3.0;
}

}  // namespace detail

/// Mini-batch Adam on the MSE loss. Per-sample gradients are computed
/// (possibly concurrently) into separate buffers and summed in batch order,
/// so results do not depend on the worker count.
inline TrainResult train(Model model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) fail(ErrorKind::Config, "training split is empty");
  for (const auto& s : train_set) model.check_input(s.sequence);

  const auto start = std::chrono::steady_clock::now();
  AdamState adam = AdamState::for_params(model.params, cfg.adam);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const std::size_t slots = std::min(cfg.batch_size, train_set.size());
  std::vector<Gradients> grads(slots, Gradients::like(model.params));
  std::vector<double> losses(slots);
  std::deque<double> recent;

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  result.best_model = model;
  bool stop = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    CounterRng shuffle(derive_seed(cfg.seed, 0xE90C, epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b0 = 0; b0 < order.size() && !stop; b0 += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - b0);
      parallel_for(n, cfg.threads, [&](std::size_t i) {
        const Sample& s = train_set[order[b0 + i]];
        grads[i].zero();
        Tape tape(model.params);
        const Var out = model.forward(tape, s.sequence);
        const auto pred = motion_from_flat<MotionPrediction>(tape.value(out).data());
        const LossResult l = mse_loss(pred, s.labels);
        losses[i] = l.loss;
        tape.backward(out, Tensor({9}, std::vector<double>(l.grad.begin(), l.grad.end())), grads[i]);
      });
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) batch_loss += losses[i];
      batch_loss /= static_cast<double>(n);
      recent.push_back(batch_loss);
      if (recent.size() > 8) recent.pop_front();
      if (!std::isfinite(batch_loss)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << ", batch " << batch_index << "; recent batch losses:";
        for (double v : recent) os << ' ' << v;
        fail(ErrorKind::Numerical, os.str());
      }
      epoch_loss += batch_loss * static_cast<double>(n);

      zero_grad(model.params);
      for (std::size_t i = 0; i < n; ++i) accumulate_into(model.params, grads[i]);
      const double inv = 1.0 / static_cast<double>(n);
      for (auto& p : model.params) {
        p.grad_weight *= inv;
        p.grad_bias *= inv;
      }
      adam_step(model.params, adam);
      ++result.steps;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) stop = true;
    }

    HistoryEntry entry;
    entry.epoch = epoch;
    entry.steps = result.steps;
    entry.train_loss = epoch_loss / static_cast<double>(order.size());
    double score = entry.train_loss;
    if (!val_set.empty()) {
      const auto preds = predict_all(model, val_set, cfg.threads);
      const auto labels = labels_of(val_set);
      entry.val_mae = detail::mean_horizon_mae(preds, labels, &entry.val_mae_now);
      score = entry.val_mae;
    } else {
      entry.val_mae = entry.val_mae_now = std::numeric_limits<double>::quiet_NaN();
    }
    entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.entries.push_back(entry);
    if (cfg.log)
      *cfg.log << to_string(model.arch) << " epoch " << epoch << " loss " << entry.train_loss << " val_mae "
               << entry.val_mae << " (" << entry.wall_seconds << " s)\n";

    if (score < best) {
      best = score;
      since_best = 0;
      result.best_model = model;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      stop = true;
    }
  }

  result.final_model = std::move(model);
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    save_checkpoint(cfg.out_dir / "final.ckpt", result.final_model, result.steps);
    save_checkpoint(cfg.out_dir / "best.ckpt", result.best_model, result.steps);
    const std::string csv = result.history.to_csv();
    write_file(cfg.out_dir / "history.csv", csv.data(), csv.size());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  std::string arch;
  std::size_t samples = 0;
  std::array<MeanStd, 3> mae{};  // now, +1, +2; mm
  double acc = 0.0;              // percent
  MeanStd time_ms;               // single-threaded forward pass
  std::uint64_t model_seed = 0;
  std::uint64_t data_seed = 0;
  std::vector<std::string> warnings;
};

/// Runs the predictor over `samples` one at a time, timing each call.
inline EvalReport evaluate(const Predictor& predictor, std::span<const Sample> samples, std::string arch = "custom") {
  if (samples.empty()) fail(ErrorKind::Config, "cannot evaluate on an empty split");
  EvalReport r;
  r.arch = std::move(arch);
  r.samples = samples.size();
  std::vector<MotionPrediction> preds;
  std::vector<double> times;
  preds.reserve(samples.size());
  for (const auto& s : samples) {
    const auto t0 = std::chrono::steady_clock::now();
    preds.push_back(predictor(s.sequence));
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    if (!preds.back().all_finite()) fail(ErrorKind::Numerical, "non-finite prediction during evaluation");
  }
  const auto labels = labels_of(samples);
  for (std::size_t h = 0; h < 3; ++h) r.mae[h] = mae_metric(preds, labels, static_cast<Horizon>(h));
  r.acc = acc_metric(preds, labels, &r.warnings);
  r.time_ms = mean_std(times);
  return r;
}

inline EvalReport evaluate(const Model& model, std::span<const Sample> samples) {
  EvalReport r = evaluate([&](const VolumeSequence& seq) { return model.predict(seq); }, samples,
                          std::string(to_string(model.arch)));
  r.model_seed = model.seed;
  return r;
}

struct BenchReport {
  std::vector<double> timings_ms;
  MeanStd time_ms;
  double hz = 0.0;
};

/// Wall-clock per single-sequence forward pass after warm-up.
inline BenchReport benchmark_inference(const Model& model, std::size_t n_warmup, std::size_t n_runs,
                                       std::uint64_t seed = 7) {
  if (n_runs < 10) fail(ErrorKind::Config, "benchmark needs at least 10 timed runs");
  const auto& v = model.config.volume_size;
  const VolumeSequence seq(Tensor::uniform({model.config.sequence_length, v[0], v[1], v[2]}, seed));
  for (std::size_t i = 0; i < n_warmup; ++i) (void)model.predict(seq);
  BenchReport r;
  for (std::size_t i = 0; i < n_runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)model.predict(seq);
    r.timings_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  r.time_ms = mean_std(r.timings_ms);
  r.hz = 1000.0 / r.time_ms.mean;
  return r;
}

}  // namespace volt4d
