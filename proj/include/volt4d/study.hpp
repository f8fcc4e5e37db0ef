#pragma once

// Five-architecture comparison. Every architecture is trained under the same
// data, shuffle seed and optimizer settings, then its best-validation model is
// evaluated on the test split.
//
// report.csv        one row per architecture, fixed order
// report_seeds.csv  one row per (architecture, seed)
// report.txt        the same numbers as report.csv, aligned for reading
//
// MAE columns are mm, aCC is percent, time columns are ms (wall clock, so they
// are excluded from reproducibility comparisons).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "volt4d/harness.hpp"

namespace volt4d {

struct StudyConfig {
  std::vector<ArchId> archs{kAllArchs.begin(), kAllArchs.end()};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  ModelConfig model;
  TrainConfig train;  // train.seed is replaced per study seed
  std::filesystem::path out_dir;
};

struct SeedResult {
  ArchId arch = ArchId::NPathCnn4d;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  EvalReport report;
  std::size_t steps = 0;
  double train_seconds = 0.0;
};

struct StudyResult {
  std::vector<SeedResult> runs;
  std::vector<std::vector<std::string>> table;  // header row, then one row per architecture
};

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{
      "arch",          "model",         "status",      "seeds",  "samples",     "params",
      "mae_now_mm",    "mae_now_std_mm", "mae_plus1_mm", "mae_plus1_std_mm", "mae_plus2_mm", "mae_plus2_std_mm",
      "acc_pct",       "acc_std_pct",   "time_ms",     "time_std_ms"};
  return cols;
}

inline bool is_timing_column(std::string_view name) { return name.starts_with("time") || name.ends_with("_s"); }

inline std::string format_fixed(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Model seed for one study cell; depends on the study seed and architecture.
inline std::uint64_t study_model_seed(std::uint64_t seed, ArchId arch) {
  return derive_seed(seed, 0x5701, static_cast<std::uint64_t>(arch));
}

namespace detail {

// Pools per-seed (mean, std) pairs of equal sample counts into one population.
inline MeanStd pool(const std::vector<MeanStd>& parts) {
  if (parts.empty()) return {std::nan(""), std::nan("")};
  double m = 0.0, sq = 0.0;
  for (const auto& p : parts) {
    m += p.mean;
    sq += p.std * p.std + p.mean * p.mean;
  }
  m /= static_cast<double>(parts.size());
  sq /= static_cast<double>(parts.size());
  return {m, std::sqrt(std::max(0.0, sq - m * m))};
}

inline std::string csv_escape(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '"') c = ';';
  return s;
}

inline std::string join_csv(const std::vector<std::string>& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
  return out;
}

}  // namespace detail

inline std::vector<std::string> summarize_arch(ArchId arch, const StudyConfig& cfg,
                                               const std::vector<SeedResult>& runs) {
  std::vector<MeanStd> mae[3], time;
  std::vector<double> acc;
  std::size_t samples = 0, attempted = 0;
  std::string first_error;
  for (const auto& r : runs) {
    if (r.arch != arch) continue;
    ++attempted;
    if (!r.ok) {
      if (first_error.empty()) first_error = r.error;
      continue;
    }
    for (std::size_t h = 0; h < 3; ++h) mae[h].push_back(r.report.mae[h]);
    time.push_back(r.report.time_ms);
    acc.push_back(r.report.acc);
    samples += r.report.samples;
  }
  const std::size_t ok = acc.size();
  std::string status = ok == attempted ? "ok" : ok == 0 ? "failed" : "partial";
  if (!first_error.empty()) status += ": " + detail::csv_escape(first_error);

  const MeanStd acc_ms = ok ? mean_std(acc) : MeanStd{std::nan(""), std::nan("")};
  std::size_t n_params = 0;
  try {
    n_params = count_parameters(build_model(arch, cfg.model, 0));
  } catch (const std::exception&) {
  }
  std::vector<std::string> row{std::string(to_string(arch)), std::string(display_name(arch)), status,
                               std::to_string(ok), std::to_string(samples), std::to_string(n_params)};
  for (std::size_t h = 0; h < 3; ++h) {
    const MeanStd m = detail::pool(mae[h]);
    row.push_back(format_fixed(m.mean));
    row.push_back(format_fixed(m.std));
  }
  row.push_back(format_fixed(acc_ms.mean));
  row.push_back(format_fixed(acc_ms.std));
  const MeanStd t = detail::pool(time);
  row.push_back(format_fixed(t.mean));
  row.push_back(format_fixed(t.std));
  return row;
}

inline std::string format_table(const std::vector<std::vector<std::string>>& table) {
  std::vector<std::size_t> width;
  for (const auto& row : table)
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], row[i].size());
    }
  std::ostringstream os;
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      os << row[i];
      if (i + 1 < row.size()) os << std::string(width[i] - row[i].size() + 2, ' ');
    }
    os << '\n';
  }
  return os.str();
}

inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline std::string seeds_csv(const std::vector<SeedResult>& runs) {
  std::ostringstream os;
  os << "arch,seed,status,steps,mae_now_mm,mae_plus1_mm,mae_plus2_mm,acc_pct,time_ms,train_s\n";
  for (const auto& r : runs) {
    os << to_string(r.arch) << ',' << r.seed << ',' << (r.ok ? "ok" : "failed: " + detail::csv_escape(r.error))
       << ',' << r.steps;
    for (std::size_t h = 0; h < 3; ++h) os << ',' << format_fixed(r.ok ? r.report.mae[h].mean : std::nan(""));
    os << ',' << format_fixed(r.ok ? r.report.acc : std::nan(""));
    os << ',' << format_fixed(r.ok ? r.report.time_ms.mean : std::nan(""));
    os << ',' << format_fixed(r.train_seconds) << '\n';
  }
  return os.str();
}

/// Trains and evaluates every (architecture, seed) cell. A failing cell is
/// recorded and the study moves on.
inline StudyResult run_study(const StudyConfig& cfg, std::span<const Sample> train_set,
                             std::span<const Sample> val_set, std::span<const Sample> test_set) {
  if (cfg.archs.empty()) fail(ErrorKind::Config, "study needs at least one architecture");
  if (cfg.seeds.empty()) fail(ErrorKind::Config, "study needs at least one seed");
  StudyResult result;
  for (ArchId arch : cfg.archs) {
    for (std::uint64_t seed : cfg.seeds) {
      SeedResult r;
      r.arch = arch;
      r.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        if (!cfg.out_dir.empty())
          tc.out_dir = cfg.out_dir / std::string(to_string(arch)) / ("seed" + std::to_string(seed));
        TrainResult trained = train(build_model(arch, cfg.model, study_model_seed(seed, arch)), train_set, val_set, tc);
        r.steps = trained.steps;
        r.report = evaluate(trained.best_model, test_set);
        r.ok = true;
      } catch (const Error& e) {
        r.error = std::string(to_string(e.kind())) + " " + e.what();
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (cfg.train.log)
        *cfg.train.log << to_string(arch) << " seed " << seed << (r.ok ? " done" : " failed: " + r.error) << '\n';
      result.runs.push_back(std::move(r));
    }
  }

  result.table.push_back(report_columns());
  for (ArchId arch : kAllArchs)
    if (std::find(cfg.archs.begin(), cfg.archs.end(), arch) != cfg.archs.end())
      result.table.push_back(summarize_arch(arch, cfg, result.runs));

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::string csv;
    for (const auto& row : result.table) csv += detail::join_csv(row) + '\n';
    write_file(cfg.out_dir / "report.csv", csv.data(), csv.size());
    const std::string seeds = seeds_csv(result.runs);
    write_file(cfg.out_dir / "report_seeds.csv", seeds.data(), seeds.size());
    const std::string txt = format_table(result.table);
    write_file(cfg.out_dir / "report.txt", txt.data(), txt.size());
  }
  return result;
}

}  // namespace volt4d
