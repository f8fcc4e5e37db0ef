// volt4d command-line front end.
//
//   volt4d gen-data | train | eval | bench | gradcheck | study  [flags]
//
// Settings resolve as built-in defaults < --config file < flags. Every run
// writes the resolved settings to <out>/effective_config.txt; passing that
// file back via --config reproduces the run.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "volt4d/volt4d.hpp"

namespace fs = std::filesystem;
using namespace volt4d;

namespace {

struct Flag {
  std::string name;  // long flag without dashes
  std::string key;   // section.key in the config
  std::string help;
};

// Flag values stay as strings until the config is resolved.
struct Command {
  CLI::App* app = nullptr;
  std::vector<Flag> flags;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

KeyValues default_config() {
  KeyValues kv;
  kv.set("run.out", "out");
  kv.set("run.data", "");
  kv.set("run.arch", "npathcnn4d");
  kv.set("run.checkpoint", "");
  kv.set("run.split", "test");
  DatasetConfig{}.write(kv, "dataset.");
  ModelConfig{}.write(kv, "model.");
  TrainConfig{}.write(kv, "train.");
  kv.set("bench.warmup", "5");
  kv.set("bench.runs", "50");
  kv.set("gradcheck.step", "1e-05");
  kv.set("gradcheck.tolerance", "1e-05");
  kv.set("gradcheck.max_entries", "0");
  kv.set("gradcheck.seed", "0");
  kv.set("study.seeds", "3");
  kv.set("study.archs", "twopathcnn3d,npathcnn3d,cnn4d,npathcnn4d,grucnn3d");
  return kv;
}

const std::vector<Flag> kDatasetFlags{
    {"rois", "dataset.rois", "number of ROIs (one phantom each)"},
    {"trajectories", "dataset.trajectories", "trajectories per ROI"},
    {"volume-size", "dataset.volume_size", "voxels per volume: N or D,H,W"},
    {"sequence-length", "dataset.sequence_length", "volumes per sequence"},
    {"fov", "dataset.fov_mm", "field of view in mm: depth,height,width"},
    {"magnitudes", "dataset.magnitude_classes_mm", "per-step magnitude classes in mm"},
    {"noise", "dataset.noise_sigma", "additive Gaussian noise sigma"},
    {"val-rois", "dataset.val_rois", "ROIs held out for validation"},
    {"test-rois", "dataset.test_rois", "ROIs held out for testing"},
};

const std::vector<Flag> kModelFlags{
    {"path-channels", "model.path_channels", "3D path conv widths"},
    {"cnn4d-channels", "model.cnn4d_channels", "leading 4D conv widths of Cnn4d"},
    {"gru-channels", "model.gru_channels", "ConvGRU hidden channels"},
    {"growth-rate", "model.growth_rate", "DenseNet growth rate"},
    {"blocks", "model.blocks", "DenseNet blocks"},
    {"layers-per-block", "model.layers_per_block", "conv layers per DenseNet block"},
    {"kernel", "model.kernel", "spatial kernel extent"},
    {"temporal-kernel", "model.temporal_kernel", "temporal kernel extent"},
    {"standardize-frames", "model.standardize_frames", "rescale each input volume to zero mean, unit variance (0 or 1)"},
};

const std::vector<Flag> kTrainFlags{
    {"epochs", "train.epochs", "training epochs"},
    {"batch-size", "train.batch_size", "mini-batch size"},
    {"lr", "train.lr", "Adam learning rate"},
    {"beta1", "train.beta1", "Adam beta1"},
    {"beta2", "train.beta2", "Adam beta2"},
    {"epsilon", "train.epsilon", "Adam epsilon"},
    {"seed", "train.seed", "master seed for init and shuffling"},
    {"patience", "train.patience", "early-stop patience in epochs (0: off)"},
    {"max-steps", "train.max_steps", "cap on optimizer steps (0: none)"},
};

void add_flags(Command& cmd, const std::vector<Flag>& flags, const KeyValues& defaults) {
  for (const auto& f : flags) {
    cmd.flags.push_back(f);
    auto* opt = cmd.app->add_option("--" + f.name, cmd.values[f.name], f.help);
    opt->default_str(defaults.get(f.key));
    cmd.options[f.name] = opt;
  }
}

/// defaults < config file < flags given on the command line.
KeyValues resolve(const Command& cmd, const std::string& config_path) {
  KeyValues kv = default_config();
  if (!config_path.empty()) {
    const KeyValues file = KeyValues::load(config_path);
    for (const auto& [k, v] : file.entries()) {
      if (!kv.has(k)) fail(ErrorKind::Config, config_path + ": unknown setting '" + k + "'");
      kv.set(k, v);
    }
  }
  for (const auto& f : cmd.flags)
    if (cmd.options.at(f.name)->count() > 0) kv.set(f.key, cmd.values.at(f.name));
  return kv;
}

fs::path data_dir(const KeyValues& kv) {
  const std::string d = kv.get("run.data");
  return d.empty() ? fs::path(kv.get("run.out")) / "data" : fs::path(d);
}

void write_text(const fs::path& path, const std::string& text) { write_file(path, text.data(), text.size()); }

void echo_config(const KeyValues& kv, const std::string& command) {
  const fs::path out = kv.get("run.out");
  fs::create_directories(out);
  write_text(out / "effective_config.txt", "# volt4d " + command + "\n" + kv.to_string());
}

DatasetReader ensure_dataset(const KeyValues& kv, std::size_t threads, bool verbose) {
  const fs::path dir = data_dir(kv);
  if (!fs::exists(dir / "manifest.txt")) {
    DatasetConfig dc;
    dc.read(kv, "dataset.");
    if (verbose) std::cerr << "generating dataset in " << dir << '\n';
    build_dataset(dc, dir, threads);
  }
  return DatasetReader(dir);
}

std::string eval_text(const EvalReport& r) {
  std::ostringstream os;
  os << "arch=" << r.arch << "\nsamples=" << r.samples << "\nmodel_seed=" << r.model_seed;
  const char* names[] = {"now", "plus1", "plus2"};
  for (std::size_t h = 0; h < 3; ++h)
    os << "\nmae_" << names[h] << "_mm=" << format_fixed(r.mae[h].mean) << "\nmae_" << names[h]
       << "_std_mm=" << format_fixed(r.mae[h].std);
  os << "\nacc_pct=" << format_fixed(r.acc) << "\ntime_ms=" << format_fixed(r.time_ms.mean)
     << "\ntime_std_ms=" << format_fixed(r.time_ms.std) << '\n';
  return os.str();
}

int cmd_gen_data(const KeyValues& kv, std::size_t threads) {
  DatasetConfig dc;
  dc.read(kv, "dataset.");
  const fs::path dir = data_dir(kv);
  const DatasetManifest m = build_dataset(dc, dir, threads);
  std::cout << "dataset: " << dir.string() << "\nsamples: " << m.config.samples() << "\nsplit: train "
            << m.train_rois.size() << " / val " << m.val_rois.size() << " / test " << m.test_rois.size()
            << " ROIs\n";
  return 0;
}

int cmd_train(const KeyValues& kv, std::size_t threads, bool verbose) {
  const DatasetReader data = ensure_dataset(kv, threads, verbose);
  ModelConfig mc;
  mc.read(kv, "model.");
  mc.sequence_length = data.manifest().config.sequence_length;
  mc.volume_size = data.manifest().config.volume_size;
  TrainConfig tc;
  tc.read(kv, "train.");
  tc.threads = threads;
  tc.out_dir = kv.get("run.out");
  if (verbose) tc.log = &std::cerr;
  const ArchId arch = parse_arch(kv.get("run.arch"));
  const auto train_set = data.load_split(Split::Train);
  const auto val_set = data.load_split(Split::Val);
  const TrainResult r = train(build_model(arch, mc, tc.seed), train_set, val_set, tc);
  const auto& last = r.history.entries.back();
  std::cout << "arch: " << to_string(arch) << "\nepochs: " << r.history.entries.size() << "\nsteps: " << r.steps
            << "\nfinal train loss: " << format_fixed(last.train_loss) << " mm^2\nfinal val MAE: "
            << format_fixed(last.val_mae) << " mm\ncheckpoints: " << (tc.out_dir / "final.ckpt").string() << ", "
            << (tc.out_dir / "best.ckpt").string() << '\n';
  return 0;
}

int cmd_eval(const KeyValues& kv, std::size_t threads, bool verbose) {
  const std::string ckpt = kv.get("run.checkpoint");
  if (ckpt.empty()) fail(ErrorKind::Config, "eval needs --checkpoint");
  const Checkpoint c = load_checkpoint(ckpt);
  const DatasetReader data = ensure_dataset(kv, threads, verbose);
  const auto samples = data.load_split(parse_split(kv.get("run.split")));
  EvalReport r = evaluate(c.model, samples);
  r.data_seed = data.manifest().config.seed;
  const std::string text = eval_text(r);
  write_text(fs::path(kv.get("run.out")) / "eval.txt", text);
  std::cout << text;
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int cmd_bench(const KeyValues& kv) {
  ModelConfig mc;
  mc.read(kv, "model.");
  DatasetConfig dc;
  dc.read(kv, "dataset.");
  mc.sequence_length = dc.sequence_length;
  mc.volume_size = dc.volume_size;
  const ArchId arch = parse_arch(kv.get("run.arch"));
  const Model model = build_model(arch, mc, parse_number<std::uint64_t>(kv.get("train.seed"), "seed"));
  const BenchReport b = benchmark_inference(model, parse_number<std::size_t>(kv.get("bench.warmup"), "warmup"),
                                            parse_number<std::size_t>(kv.get("bench.runs"), "runs"));
  std::ostringstream os;
  os << "arch=" << to_string(arch) << "\nparams=" << count_parameters(model) << "\nruns=" << b.timings_ms.size()
     << "\ntime_ms=" << format_fixed(b.time_ms.mean) << "\ntime_std_ms=" << format_fixed(b.time_ms.std)
     << "\nthroughput_hz=" << format_fixed(b.hz) << '\n';
  write_text(fs::path(kv.get("run.out")) / "bench.txt", os.str());
  std::cout << os.str();
  return 0;
}

int cmd_gradcheck(const KeyValues& kv) {
  GradcheckOptions opt;
  opt.step = parse_number<double>(kv.get("gradcheck.step"), "step");
  opt.tolerance = parse_number<double>(kv.get("gradcheck.tolerance"), "tolerance");
  opt.max_entries_per_tensor = parse_number<std::size_t>(kv.get("gradcheck.max_entries"), "max_entries");
  opt.seed = parse_number<std::uint64_t>(kv.get("gradcheck.seed"), "seed");
  std::vector<GradcheckCase> cases = layer_gradchecks(opt);
  for (auto& c : architecture_gradchecks(opt)) cases.push_back(std::move(c));
  std::vector<std::vector<std::string>> table{{"component", "entries", "max_rel_error", "result"}};
  bool all = true;
  for (const auto& c : cases) {
    std::size_t n = 0;
    for (const auto& e : c.report.entries) n += e.checked;
    char err[32];
    std::snprintf(err, sizeof err, "%.3e", c.report.max_error());
    table.push_back({c.name, std::to_string(n), err, c.report.passed() ? "pass" : "FAIL"});
    all = all && c.report.passed();
  }
  const std::string text = format_table(table);
  write_text(fs::path(kv.get("run.out")) / "gradcheck.txt", text);
  std::cout << text << (all ? "all components pass" : "gradient check FAILED") << '\n';
  return all ? 0 : 1;
}

int cmd_study(const KeyValues& kv, std::size_t threads, bool verbose) {
  const DatasetReader data = ensure_dataset(kv, threads, verbose);
  StudyConfig sc;
  sc.model.read(kv, "model.");
  sc.model.sequence_length = data.manifest().config.sequence_length;
  sc.model.volume_size = data.manifest().config.volume_size;
  sc.train.read(kv, "train.");
  sc.train.threads = threads;
  if (verbose) sc.train.log = &std::cerr;
  sc.archs.clear();
  std::istringstream archs(kv.get("study.archs"));
  for (std::string a; std::getline(archs, a, ',');)
    if (!trim(a).empty()) sc.archs.push_back(parse_arch(trim(a)));
  const auto n_seeds = parse_number<std::size_t>(kv.get("study.seeds"), "seeds");
  if (n_seeds == 0) fail(ErrorKind::Config, "--seeds must be >= 1");
  sc.seeds.clear();
  for (std::size_t i = 0; i < n_seeds; ++i) sc.seeds.push_back(sc.train.seed + i);
  sc.out_dir = kv.get("run.out");
  const auto train_set = data.load_split(Split::Train);
  const auto val_set = data.load_split(Split::Val);
  const auto test_set = data.load_split(Split::Test);
  const StudyResult r = run_study(sc, train_set, val_set, test_set);
  std::cout << format_table(r.table);
  for (const auto& run : r.runs)
    if (!run.ok) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const KeyValues defaults = default_config();
  CLI::App app{"volt4d: spatio-temporal motion estimation and forecasting on volumetric sequences"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = defaults.get("run.out");
  std::size_t threads = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "key=value settings file with [section] headers");
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  std::map<std::string, Command> commands;
  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, help);
    c.app->add_option("--out", out_dir, "output directory")->capture_default_str();
    c.app->add_option("--threads", threads, "worker threads (0: $VOLT4D_THREADS or all cores)")
        ->capture_default_str();
    return c;
  };
  const Flag data_flag{"data", "run.data", "dataset directory (default: <out>/data)"};
  const Flag arch_flag{"arch", "run.arch", "architecture: twopathcnn3d npathcnn3d cnn4d npathcnn4d grucnn3d"};

  Command& gen = make("gen-data", "generate the synthetic dataset");
  add_flags(gen, {data_flag}, defaults);
  add_flags(gen, kDatasetFlags, defaults);
  add_flags(gen, {{"seed", "dataset.seed", "dataset seed"}}, defaults);

  Command& tr = make("train", "train one architecture");
  add_flags(tr, {arch_flag, data_flag}, defaults);
  add_flags(tr, kModelFlags, defaults);
  add_flags(tr, kTrainFlags, defaults);
  tr.options.at("arch")->required()->default_str("");

  Command& ev = make("eval", "evaluate a checkpoint on a dataset split");
  add_flags(ev, {{"checkpoint", "run.checkpoint", "checkpoint file"}, data_flag,
                 {"split", "run.split", "split: train, val or test"}},
            defaults);
  ev.options.at("checkpoint")->required()->default_str("");

  Command& be = make("bench", "time single-sequence inference");
  add_flags(be, {arch_flag}, defaults);
  add_flags(be, kModelFlags, defaults);
  add_flags(be, {{"volume-size", "dataset.volume_size", "voxels per volume: N or D,H,W"},
                 {"sequence-length", "dataset.sequence_length", "volumes per sequence"},
                 {"warmup", "bench.warmup", "untimed warm-up passes"},
                 {"runs", "bench.runs", "timed passes (>= 10)"},
                 {"seed", "train.seed", "initialisation seed"}},
            defaults);
  be.options.at("arch")->required()->default_str("");

  Command& gc = make("gradcheck", "finite-difference gradient checks for every layer and architecture");
  add_flags(gc, {{"step", "gradcheck.step", "central difference step"},
                 {"tolerance", "gradcheck.tolerance", "max relative error"},
                 {"max-entries", "gradcheck.max_entries", "entries sampled per tensor (0: all)"},
                 {"seed", "gradcheck.seed", "seed for inputs and sampling"}},
            defaults);

  Command& st = make("study", "train and evaluate all architectures over several seeds");
  add_flags(st, {{"seeds", "study.seeds", "number of seeds (master seed, +1, ...)"},
                 {"archs", "study.archs", "comma-separated architectures"}, data_flag},
            defaults);
  add_flags(st, kDatasetFlags, defaults);
  add_flags(st, {{"data-seed", "dataset.seed", "dataset seed"}}, defaults);
  add_flags(st, kModelFlags, defaults);
  add_flags(st, kTrainFlags, defaults);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    for (auto& [name, cmd] : commands) {
      if (!cmd.app->parsed()) continue;
      KeyValues kv = resolve(cmd, config_path);
      if (cmd.app->get_option("--out")->count() > 0 || !kv.has("run.out")) kv.set("run.out", out_dir);
      const std::size_t workers = resolve_threads(threads);
      echo_config(kv, name);
      if (name == "gen-data") return cmd_gen_data(kv, workers);
      if (name == "train") return cmd_train(kv, workers, verbose);
      if (name == "eval") return cmd_eval(kv, workers, verbose);
      if (name == "bench") return cmd_bench(kv);
      if (name == "gradcheck") return cmd_gradcheck(kv);
      if (name == "study") return cmd_study(kv, workers, verbose);
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '"' || c == '\n') c = '\'';
    std::cerr << "error: kind=" << to_string(e.kind()) << " message=\"" << msg << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: kind=internal message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 2;
}
