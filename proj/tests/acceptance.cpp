// Acceptance run: one PASS/FAIL line per criterion.
//
//   volt4d_acceptance [--only 1,2,...] [--work DIR] [--threads N] [--study-epochs N]
//
// Criterion 6 is a soft check; its verdict is printed but does not change the
// exit status. Every other criterion does.

#include <CLI11.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include "oracles.hpp"

using namespace volt4d;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;
};

struct Options {
  std::set<int> only;
  fs::path work = fs::temp_directory_path() / "volt4d_acceptance";
  std::size_t threads = 0;
  // Study protocol for criterion 6.
  std::size_t study_epochs = 30;
  std::size_t study_batch = 8;
  double study_lr = 1e-3;
  bool narrow = true;
  // Overfit protocol for criterion 5.
  std::size_t overfit_steps = 2000;
  std::size_t overfit_batch = 4;
  double overfit_lr = 1e-3;
  double overfit_ratio = 0.10;
  // 10% of the desk train mean |ds_now| on the first passing run (reached after 1000 steps).
  double overfit_pinned_mm = 0.2332;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. kernel correctness

Verdict kernel_correctness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t cases = 0;
  std::ostringstream os;
  auto track = [&](const char* name, std::size_t n, double err) {
    worst = std::max(worst, err);
    cases += n;
    os << name << " " << n << " cases max " << fmt("%.1e", err) << "; ";
  };

  double e3 = 0.0, ed = 0.0, et = 0.0;
  for (std::uint64_t s = 0; s < 150; ++s) {
    const auto c3 = oracle::random_conv_case(derive_seed(0xC3, s), 3);
    e3 = std::max(e3, max_abs_diff(conv3d_apply(c3.input, c3.spec, c3.params),
                                   oracle::conv(c3.input, c3.spec, c3.params.weight, c3.params.bias)));
    const auto c4 = oracle::random_conv_case(derive_seed(0xC4, s), 4);
    const Tensor ref = oracle::conv(c4.input, c4.spec, c4.params.weight, c4.params.bias);
    ed = std::max(ed, max_abs_diff(conv4d_apply(c4.input, c4.spec, c4.params, Conv4dStrategy::Direct), ref));
    et = std::max(et,
                  max_abs_diff(conv4d_apply(c4.input, c4.spec, c4.params, Conv4dStrategy::TemporalDecomposition), ref));
  }
  track("conv3d", 150, e3);
  track("conv4d-direct", 150, ed);
  track("conv4d-temporal", 150, et);

  double ep = 0.0;
  for (std::uint64_t s = 0; s < 150; ++s) {
    CounterRng rng(derive_seed(0xA9, s));
    std::vector<std::size_t> window;
    Shape shape;
    const std::size_t rank = 4 + rng.below(2);
    for (std::size_t a = 0; a < rank; ++a) {
      window.push_back(1 + rng.below(3));
      shape.push_back(window.back() * (1 + rng.below(3)));
    }
    const Tensor x = Tensor::uniform(shape, derive_seed(0xAA, s), -1, 1);
    ep = std::max(ep, max_abs_diff(avg_pool_apply(x, window), oracle::avg_pool(x, window)));
  }
  track("avg_pool", 150, ep);

  double ew = 0.0;
  for (std::uint64_t s = 0; s < 150; ++s) {
    const std::size_t rows = 1 + s % 9, cols = 1 + (s * 7) % 13;
    const Tensor w = Tensor::uniform({rows, cols}, derive_seed(0xDE, s, 1), -1, 1);
    const Tensor b = Tensor::uniform({rows}, derive_seed(0xDE, s, 2), -1, 1);
    const Tensor x = Tensor::uniform({cols}, derive_seed(0xDE, s, 3), -1, 1);
    ew = std::max(ew, max_abs_diff(dense_apply(x, LayerParams("d", w, b)), oracle::dense(x, w, b)));
  }
  track("dense", 150, ew);

  double eg = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    CounterRng rng(derive_seed(0x96, s));
    const std::size_t cin = 1 + rng.below(3), ch = 1 + rng.below(3);
    const std::size_t d = 1 + rng.below(4), h = 1 + rng.below(4), w = 1 + rng.below(4);
    ParamStore store;
    const GruCell cell = make_gru_cell(store, "g", cin, ch, 3, derive_seed(0x97, s));
    for (std::size_t i = 0; i < store.size(); ++i) store[i].bias = Tensor::uniform({ch}, derive_seed(0x98, s, i), -1, 1);
    const Tensor x = Tensor::uniform({cin, d, h, w}, derive_seed(0x99, s, 1), -1, 1);
    const Tensor hid = Tensor::uniform({ch, d, h, w}, derive_seed(0x99, s, 2), -1, 1);
    eg = std::max(eg, max_abs_diff(conv_gru_step(x, GruState{hid}, store, cell).hidden,
                                   oracle::gru_step(x, hid, store, cell)));
  }
  track("conv_gru_step", 100, eg);

  const double t = seconds_since(t0);
  os << "runtime " << fmt("%.1f", t) << " s";
  return {worst < 1e-10 && t < 60.0, os.str()};
}

// ---------------------------------------------------------------------------
// 2. conv4d strategy equivalence

Verdict strategies() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t kt = 1; kt <= 3; ++kt)
    for (std::size_t ks = 1; ks <= 3; ++ks)
      for (std::size_t st = 1; st <= 2; ++st)
        for (std::size_t ss = 1; ss <= 2; ++ss)
          for (std::size_t pt = 0; pt < kt; ++pt)
            for (std::size_t ps = 0; ps < ks; ++ps) {
              const std::uint64_t seed = derive_seed(0x57, cases);
              CounterRng rng(seed);
              ConvSpec spec;
              spec.in_channels = 1 + rng.below(3);
              spec.out_channels = 1 + rng.below(3);
              spec.kernel = {kt, ks, ks == 2 ? 3 : ks, ks};
              spec.stride = {st, ss, 1, ss};
              spec.padding = {pt, ps, std::min<std::size_t>(ps, spec.kernel[2] - 1), ps};
              const Shape shape{kt + rng.below(3), spec.in_channels, 3 + rng.below(3), 3 + rng.below(3),
                                3 + rng.below(3)};
              const Tensor x = Tensor::uniform(shape, derive_seed(seed, 1), -1, 1);
              const LayerParams p("c", Tensor::uniform(spec.weight_shape(), derive_seed(seed, 2), -1, 1),
                                  Tensor::uniform({spec.out_channels}, derive_seed(seed, 3), -1, 1));
              worst = std::max(worst, max_abs_diff(conv4d_apply(x, spec, p, Conv4dStrategy::Direct),
                                                   conv4d_apply(x, spec, p, Conv4dStrategy::TemporalDecomposition)));
              ++cases;
            }
  const double t = seconds_since(t0);
  return {worst < 1e-10 && t < 60.0,
          std::to_string(cases) + " specs, max diff " + fmt("%.1e", worst) + ", runtime " + fmt("%.1f", t) + " s"};
}

// ---------------------------------------------------------------------------
// 3. gradient suite

Verdict gradients() {
  const auto t0 = Clock::now();
  GradcheckOptions opt;
  opt.tolerance = 1e-5;
  auto cases = layer_gradchecks(opt);
  for (auto& c : architecture_gradchecks(opt)) cases.push_back(std::move(c));
  bool ok = true;
  double worst = 0.0;
  std::string failed;
  for (const auto& c : cases) {
    worst = std::max(worst, c.report.max_error());
    if (!c.report.passed()) {
      ok = false;
      failed += " " + c.name;
    }
  }
  const double t = seconds_since(t0);
  return {ok && t < 600.0, std::to_string(cases.size()) + " fragments, max rel error " + fmt("%.1e", worst) +
                               (failed.empty() ? "" : ", failing:" + failed) + ", runtime " + fmt("%.1f", t) + " s"};
}

// ---------------------------------------------------------------------------
// 4. paper-shaped data generation

Verdict data_generation(const Options& opt) {
  const auto t0 = Clock::now();
  DatasetConfig cfg;
  cfg.rois = 40;
  cfg.trajectories_per_roi = 100;
  cfg.val_rois = 5;
  cfg.test_rois = 5;
  cfg.seed = 40;
  const fs::path dir = opt.work / "paper_data";
  fs::remove_all(dir);
  build_dataset(cfg, dir, opt.threads);
  const DatasetReader reader(dir);
  const auto& m = reader.manifest();

  std::vector<std::string> problems;
  std::set<std::uint32_t> rois;
  for (const auto* v : {&m.train_rois, &m.val_rois, &m.test_rois}) rois.insert(v->begin(), v->end());
  if (m.train_rois.size() != 30 || m.val_rois.size() != 5 || m.test_rois.size() != 5 || rois.size() != 40)
    problems.push_back("split sizes");
  if (reader.size() != 4000) problems.push_back("sample count " + std::to_string(reader.size()));

  double worst_label = 0.0, mean_now = 0.0, mean_plus2 = 0.0;
  std::size_t step_violations = 0, path_violations = 0, split_violations = 0;
  for (Split split : {Split::Train, Split::Val, Split::Test}) {
    for (const SampleKey key : reader.keys_of(split)) {
      const Sample s = reader.load(key);
      if (m.split_of(s.roi_id) != split || s.roi_id != key.roi_id) ++split_violations;
      const Trajectory traj = sample_trajectory(cfg, key);
      if (traj.max_step() > traj.magnitude_class) ++step_violations;
      if (norm(s.labels.now) > traj.path_length(4) + 1e-12) ++path_violations;
      for (int a = 0; a < 3; ++a) {
        worst_label = std::max(worst_label, std::abs(s.labels.now[a] - (traj.samples[4][a] - traj.samples[0][a])));
        worst_label = std::max(worst_label, std::abs(s.labels.plus1[a] - (traj.samples[5][a] - traj.samples[0][a])));
        worst_label = std::max(worst_label, std::abs(s.labels.plus2[a] - (traj.samples[6][a] - traj.samples[0][a])));
      }
      if (!s.sequence.frames().all_finite()) problems.push_back("non-finite volume");
      if (s.sequence.volume_shape() != Shape{12, 12, 12}) problems.push_back("volume shape");
      mean_now += norm(s.labels.now);
      mean_plus2 += norm(s.labels.plus2);
    }
  }
  if (worst_label > 1e-12) problems.push_back("label error " + fmt("%.1e", worst_label));
  if (step_violations) problems.push_back(std::to_string(step_violations) + " step-bound violations");
  if (path_violations) problems.push_back(std::to_string(path_violations) + " path-length violations");
  if (split_violations) problems.push_back(std::to_string(split_violations) + " split violations");
  if (mean_plus2 < mean_now) problems.push_back("forecast targets closer than current motion");
  fs::remove_all(dir);

  const double t = seconds_since(t0);
  std::string detail = "4000 samples at 12^3, split 30/5/5 ROIs, label error " + fmt("%.1e", worst_label) +
                       ", runtime " + fmt("%.1f", t) + " s";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty() && t < 600.0, detail};
}

// ---------------------------------------------------------------------------
// Desk dataset and study model shared by criteria 5 and 6.

fs::path desk_dataset(const Options& opt) {
  const fs::path dir = opt.work / "desk_data";
  if (!fs::exists(dir / "manifest.txt")) build_dataset(DatasetConfig{}, dir, opt.threads);
  return dir;
}

ModelConfig study_model(const Options& opt) {
  ModelConfig c;
  if (opt.narrow) {
    c.path_channels = {4, 8};
    c.cnn4d_channels = {4, 4, 8};
    c.gru_channels = 4;
    c.growth_rate = 4;
  }
  return c;
}

// ---------------------------------------------------------------------------
// 5. overfit smoke test

Verdict overfit(const Options& opt) {
  const auto t0 = Clock::now();
  const DatasetReader reader(desk_dataset(opt));
  const auto all = reader.load_split(Split::Train);
  double mean_now = 0.0;
  for (const auto& s : all) mean_now += norm(s.labels.now);
  mean_now /= static_cast<double>(all.size());
  const double threshold = std::min(opt.overfit_ratio * mean_now, opt.overfit_pinned_mm);

  std::vector<Sample> eight;
  for (std::size_t i = 0; i < 8; ++i) eight.push_back(all[i * all.size() / 8]);

  Model model = build_model(ArchId::NPathCnn4d, study_model(opt), 5);
  TrainConfig tc;
  tc.batch_size = opt.overfit_batch;
  tc.adam.lr = opt.overfit_lr;
  tc.threads = opt.threads;
  tc.seed = 5;
  const std::size_t chunk = 50;
  std::size_t steps = 0;
  double mae = 0.0;
  while (steps < opt.overfit_steps) {
    tc.max_steps = std::min(chunk, opt.overfit_steps - steps);
    tc.epochs = tc.max_steps;
    tc.seed = derive_seed(5, steps);
    TrainResult r = train(std::move(model), eight, {}, tc);
    steps += r.steps;
    model = std::move(r.final_model);
    mae = evaluate(model, eight).mae[0].mean;
    if (mae < threshold) break;
  }
  const double t = seconds_since(t0);
  return {mae < threshold, "train MAE_now " + fmt("%.4f", mae) + " mm after " + std::to_string(steps) +
                               " steps; threshold " + fmt("%.4f", threshold) + " mm (pinned " + fmt("%.4f", opt.overfit_pinned_mm) +
                               ", " + fmt("%.0f", 100 * opt.overfit_ratio) + "% of mean |ds_now| " + fmt("%.3f", mean_now) +
                               " mm), runtime " + fmt("%.1f", t) + " s"};
}

// ---------------------------------------------------------------------------
// 6. relative-ordering study

Verdict ordering_study(const Options& opt) {
  const auto t0 = Clock::now();
  const DatasetReader reader(desk_dataset(opt));
  const auto train_set = reader.load_split(Split::Train);
  const auto val_set = reader.load_split(Split::Val);
  const auto test_set = reader.load_split(Split::Test);

  StudyConfig cfg;
  cfg.model = study_model(opt);
  cfg.seeds = {1, 2, 3};
  cfg.train.epochs = opt.study_epochs;
  cfg.train.batch_size = opt.study_batch;
  cfg.train.adam.lr = opt.study_lr;
  cfg.train.threads = opt.threads;
  cfg.out_dir = opt.work / "study";
  const StudyResult result = run_study(cfg, train_set, val_set, test_set);
  std::cout << format_table(result.table);

  auto run_of = [&](ArchId arch, std::uint64_t seed) -> const SeedResult* {
    for (const auto& r : result.runs)
      if (r.arch == arch && r.seed == seed && r.ok) return &r;
    return nullptr;
  };
  std::size_t acc_wins = 0;
  std::string gaps;
  for (std::uint64_t seed : cfg.seeds) {
    const SeedResult* four = run_of(ArchId::NPathCnn4d, seed);
    const SeedResult* two = run_of(ArchId::TwoPathCnn3d, seed);
    if (!four || !two) continue;
    const double gap = four->report.acc - two->report.acc;
    gaps += (gaps.empty() ? "" : ", ") + fmt("%+.1f", gap);
    if (gap >= 5.0) ++acc_wins;
  }
  const std::size_t majority = cfg.seeds.size() / 2 + 1;
  bool horizons = true;
  std::string horizon_detail;
  for (ArchId arch : cfg.archs) {
    std::size_t monotone = 0;
    for (std::uint64_t seed : cfg.seeds)
      if (const SeedResult* r = run_of(arch, seed))
        if (r->report.mae[0].mean <= r->report.mae[1].mean && r->report.mae[1].mean <= r->report.mae[2].mean)
          ++monotone;
    if (monotone < majority) {
      horizons = false;
      horizon_detail += std::string(" ") + std::string(to_string(arch));
    }
  }
  const double t = seconds_since(t0);
  const bool acc_ok = acc_wins >= majority;
  return {acc_ok && horizons && t < 4 * 3600.0,
          "aCC(NPathCnn4d) - aCC(TwoPathCnn3d) per seed [" + gaps + "], " + std::to_string(acc_wins) +
              "/3 seeds >= 5 points; horizon trend " +
              (horizons ? "holds for every model" : "violated by" + horizon_detail) + "; " +
              std::to_string(opt.study_epochs) + " epochs, runtime " + fmt("%.0f", t) + " s"};
}

// ---------------------------------------------------------------------------
// 7. study determinism through the CLI

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<std::string>> without_timing(std::vector<std::vector<std::string>> table) {
  if (table.empty()) return table;
  std::vector<bool> keep;
  for (const auto& name : table[0]) keep.push_back(!is_timing_column(name));
  for (auto& row : table) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < row.size(); ++i)
      if (i < keep.size() && keep[i]) kept.push_back(row[i]);
    row = std::move(kept);
  }
  return table;
}

Verdict determinism(const Options& opt) {
  const auto t0 = Clock::now();
  const std::string args =
      " study --seeds 2 --seed 7 --data-seed 3 --rois 4 --trajectories 4 --volume-size 6 --val-rois 1 --test-rois 1"
      " --path-channels 2,3 --cnn4d-channels 2,2,3 --gru-channels 2 --growth-rate 2 --blocks 2 --layers-per-block 2"
      " --epochs 2 --batch-size 4";
  const fs::path a = opt.work / "determinism_a", b = opt.work / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string cli = VOLT4D_CLI;
  const int ca = run_command(cli + args + " --out " + a.string() + " > " + (opt.work / "det_a.log").string() + " 2>&1");
  const int cb = run_command(cli + args + " --threads 2 --out " + b.string() + " > " +
                             (opt.work / "det_b.log").string() + " 2>&1");
  if (ca != 0 || cb != 0) return {false, "study exited with " + std::to_string(ca) + "/" + std::to_string(cb)};
  bool same = true;
  std::size_t values = 0;
  for (const char* file : {"report.csv", "report_seeds.csv"}) {
    const auto ta = without_timing(read_csv(a / file)), tb = without_timing(read_csv(b / file));
    same = same && ta == tb;
    for (const auto& row : ta) values += row.size();
  }
  const double t = seconds_since(t0);
  return {same, std::to_string(values) + " non-timing CSV cells compared across two runs (1 and 2 threads), " +
                    (same ? "identical" : "DIFFERENT") + ", runtime " + fmt("%.1f", t) + " s"};
}

// ---------------------------------------------------------------------------
// 8. metrics

Verdict metrics() {
  CounterRng rng(88);
  double acc_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(0.05, 20.0), b = rng.uniform(-10, 10);
    std::vector<MotionPrediction> p;
    std::vector<MotionLabels> t;
    for (int i = 0; i < 30; ++i) {
      std::array<double, 9> v{}, w{};
      for (std::size_t c = 0; c < 9; ++c) {
        v[c] = rng.uniform(-3, 3);
        w[c] = a * v[c] + b;
      }
      t.push_back(motion_from_flat<MotionLabels>(v));
      p.push_back(motion_from_flat<MotionPrediction>(w));
    }
    acc_err = std::max(acc_err, std::abs(acc_metric(p, t) - 100.0));
  }

  double mae_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MotionPrediction> p;
    std::vector<MotionLabels> t;
    for (int i = 0; i < 25; ++i) {
      std::array<double, 9> v{}, w{};
      for (std::size_t c = 0; c < 9; ++c) {
        v[c] = rng.uniform(-3, 3);
        w[c] = rng.uniform(-3, 3);
      }
      t.push_back(motion_from_flat<MotionLabels>(v));
      p.push_back(motion_from_flat<MotionPrediction>(w));
    }
    for (std::size_t h = 0; h < 3; ++h) {
      double sum = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        double e = 0.0;
        for (std::size_t c = 0; c < 3; ++c) e += std::abs(p[i].flat()[3 * h + c] - t[i].flat()[3 * h + c]);
        sum += e / 3.0;
      }
      mae_err = std::max(mae_err, std::abs(mae_metric(p, t, static_cast<Horizon>(h)).mean - sum / double(p.size())));
    }
  }

  // Table-1-shaped report from a one-epoch study on a tiny dataset.
  DatasetConfig dc;
  dc.volume_size = {6, 6, 6};
  dc.seed = 8;
  std::vector<Sample> train_set, test_set;
  for (std::uint32_t r = 0; r < 2; ++r) {
    const Phantom ph = roi_phantom(dc, r);
    for (std::uint32_t k = 0; k < 4; ++k) (r == 0 ? train_set : test_set).push_back(generate_sample(dc, ph, {r, k}));
  }
  StudyConfig sc;
  sc.model = tiny_model_config();
  sc.model.sequence_length = 5;
  sc.seeds = {1};
  sc.train.epochs = 1;
  sc.train.batch_size = 4;
  const StudyResult sr = run_study(sc, train_set, {}, test_set);
  const auto& header = sr.table.front();
  auto has = [&](const char* c) { return std::find(header.begin(), header.end(), c) != header.end(); };
  const bool shape = sr.table.size() == 6 && has("mae_now_mm") && has("mae_plus1_mm") && has("mae_plus2_mm") &&
                     has("acc_pct") && has("time_ms");

  return {acc_err < 1e-9 && mae_err < 1e-12 && shape,
          "aCC affine max |acc - 100| " + fmt("%.1e", acc_err) + ", MAE oracle max diff " + fmt("%.1e", mae_err) +
              ", report " + std::to_string(sr.table.size() - 1) + " rows x " + std::to_string(header.size()) +
              " columns"};
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"volt4d acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--work", opt.work, "scratch directory")->capture_default_str();
  app.add_option("--threads", opt.threads, "worker threads (0: all cores)")->capture_default_str();
  app.add_option("--study-epochs", opt.study_epochs, "epochs per study run")->capture_default_str();
  app.add_option("--study-lr", opt.study_lr, "study learning rate")->capture_default_str();
  app.add_option("--overfit-steps", opt.overfit_steps, "optimizer step budget for criterion 5")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  opt.only.insert(only.begin(), only.end());
  fs::create_directories(opt.work);

  struct Criterion {
    int id;
    const char* name;
    bool soft;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "kernel correctness", false, kernel_correctness},
      {2, "strategy equivalence", false, strategies},
      {3, "gradient suite", false, gradients},
      {4, "data generation", false, [&] { return data_generation(opt); }},
      {5, "overfit smoke test", false, [&] { return overfit(opt); }},
      {6, "relative-ordering study", true, [&] { return ordering_study(opt); }},
      {7, "determinism", false, [&] { return determinism(opt); }},
      {8, "metrics", false, metrics},
  };

  int hard_failures = 0;
  std::vector<std::string> lines;
  for (const auto& c : criteria) {
    if (!opt.only.empty() && !opt.only.count(c.id)) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::string line = std::string(v.pass ? "PASS" : "FAIL") + " " + std::to_string(c.id) + " " + c.name +
                       (c.soft ? " (soft)" : "") + ": " + v.detail;
    std::cout << line << std::endl;
    lines.push_back(std::move(line));
    if (!v.pass && !c.soft) ++hard_failures;
  }
  std::cout << "\nsummary\n";
  for (const auto& l : lines) std::cout << l.substr(0, l.find(':')) << '\n';
  return hard_failures == 0 ? 0 : 1;
}
