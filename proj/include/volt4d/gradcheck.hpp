#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "volt4d/params.hpp"
#include "volt4d/rng.hpp"
#include "volt4d/tape.hpp"

namespace volt4d {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  // 0 checks every entry; otherwise a seeded subset of this many entries per tensor.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradcheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
  }
  double max_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
};

/// |a - n| / max(1, |a|, |n|)
inline double gradcheck_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

/// Scalar loss of a fragment. When `grads` is non-null the function must also
/// accumulate the analytic gradient of that loss into it.
using FragmentLoss = std::function<double(const ParamStore& params, Gradients* grads)>;

/// Compares analytic parameter gradients against central finite differences.
inline GradcheckReport gradcheck(ParamStore& params, const FragmentLoss& loss, const GradcheckOptions& opt = {}) {
  Gradients analytic = Gradients::like(params);
  loss(params, &analytic);

  GradcheckReport report;
  report.tolerance = opt.tolerance;
  CounterRng rng(opt.seed);
  auto check_tensor = [&](const std::string& name, Tensor& value, const Tensor& grad) {
    GradcheckEntry entry;
    entry.name = name;
    std::vector<std::size_t> indices;
    if (opt.max_entries_per_tensor == 0 || value.size() <= opt.max_entries_per_tensor) {
      indices.resize(value.size());
      for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    } else {
      for (std::size_t i = 0; i < opt.max_entries_per_tensor; ++i) indices.push_back(rng.below(value.size()));
    }
    for (auto i : indices) {
      const double saved = value[i];
      value[i] = saved + opt.step;
      const double up = loss(params, nullptr);
      value[i] = saved - opt.step;
      const double down = loss(params, nullptr);
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * opt.step);
      entry.max_rel_error = std::max(entry.max_rel_error, gradcheck_relative_error(grad[i], numeric));
      ++entry.checked;
    }
    entry.passed = entry.max_rel_error < opt.tolerance;
    report.entries.push_back(entry);
  };
  for (std::size_t p = 0; p < params.size(); ++p) {
    check_tensor(params[p].name + ".weight", params[p].weight, analytic.weight[p]);
    check_tensor(params[p].name + ".bias", params[p].bias, analytic.bias[p]);
  }
  return report;
}

/// Fixed random projection turning a tensor output into a scalar loss
/// L = sum(projection * out), which exercises every output element.
inline Tensor loss_projection(const Shape& shape, std::uint64_t seed) { return Tensor::uniform(shape, seed, -1.0, 1.0); }

inline double projected_loss(Tape& tape, Var out, const Tensor& projection, Gradients* grads) {
  const Tensor& v = tape.value(out);
  double loss = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) loss += projection[i] * v[i];
  if (grads) tape.backward(out, projection, *grads);
  return loss;
}

}  // namespace volt4d
