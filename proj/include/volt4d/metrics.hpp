#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "volt4d/error.hpp"
#include "volt4d/motion.hpp"

namespace volt4d {

struct LossResult {
  double loss = 0.0;
  std::array<double, 9> grad{};
};

/// Mean of squared errors over all 9 components; gradient 2(p - t)/9.
inline LossResult mse_loss(const MotionPrediction& pred, const MotionLabels& target) {
  const auto p = pred.flat();
  const auto t = target.flat();
  LossResult r;
  for (std::size_t i = 0; i < 9; ++i) {
    const double d = p[i] - t[i];
    r.loss += d * d;
    r.grad[i] = 2.0 * d / 9.0;
  }
  r.loss /= 9.0;
  return r;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population mean and standard deviation.
inline MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::Config, "mean/std of an empty list");
  MeanStd r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  for (double v : values) r.std += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(r.std / static_cast<double>(values.size()));
  return r;
}

/// Per-sample error is the mean |delta| over the horizon's three components;
/// returns mean and std of that error across samples, in mm.
inline MeanStd mae_metric(std::span<const MotionPrediction> preds, std::span<const MotionLabels> targets,
                          Horizon horizon) {
  if (preds.size() != targets.size())
    fail(ErrorKind::ShapeMismatch, "MAE: " + std::to_string(preds.size()) + " predictions vs " +
                                       std::to_string(targets.size()) + " targets");
  if (preds.empty()) fail(ErrorKind::Config, "MAE of an empty prediction list");
  std::vector<double> errors;
  errors.reserve(preds.size());
  const auto h = static_cast<std::size_t>(horizon);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Vec3& p = preds[i].horizon(h);
    const Vec3& t = targets[i].horizon(h);
    errors.push_back((std::abs(p[0] - t[0]) + std::abs(p[1] - t[1]) + std::abs(p[2] - t[2])) / 3.0);
  }
  return mean_std(errors);
}

/// Pearson correlation per output component across samples, averaged over the
/// 9 components, in percent. Components whose targets are constant are
/// skipped; a component whose predictions are constant contributes 0. Each
/// such event is appended to `warnings` when provided.
inline double acc_metric(std::span<const MotionPrediction> preds, std::span<const MotionLabels> targets,
                         std::vector<std::string>* warnings = nullptr) {
  if (preds.size() != targets.size())
    fail(ErrorKind::ShapeMismatch, "aCC: prediction/target count mismatch");
  if (preds.size() < 2) fail(ErrorKind::UndefinedCorrelation, "aCC needs at least 2 samples");
  const double n = static_cast<double>(preds.size());
  double sum_r = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < 9; ++c) {
    double mp = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      mp += preds[i].flat()[c];
      mt += targets[i].flat()[c];
    }
    mp /= n;
    mt /= n;
    double cov = 0.0, vp = 0.0, vt = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const double dp = preds[i].flat()[c] - mp;
      const double dt = targets[i].flat()[c] - mt;
      cov += dp * dt;
      vp += dp * dp;
      vt += dt * dt;
    }
    if (vt == 0.0) {
      if (warnings) warnings->push_back("aCC: component " + std::to_string(c) + " has constant targets, skipped");
      continue;
    }
    ++used;
    if (vp == 0.0) {
      if (warnings) warnings->push_back("aCC: component " + std::to_string(c) + " has constant predictions, r=0");
      continue;
    }
    sum_r += std::clamp(cov / std::sqrt(vp * vt), -1.0, 1.0);
  }
  if (used == 0) fail(ErrorKind::UndefinedCorrelation, "aCC undefined: every target component is constant");
  return 100.0 * sum_r / static_cast<double>(used);
}

}  // namespace volt4d
