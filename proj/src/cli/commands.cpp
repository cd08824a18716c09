#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "corrdict/cli.hpp"
#include "corrdict/errors.hpp"
#include "corrdict/learners.hpp"
#include "corrdict/matrix_io.hpp"
#include "corrdict/metrics.hpp"
#include "corrdict/parallel.hpp"
#include "corrdict/rng.hpp"
#include "corrdict/segmentation.hpp"
#include "corrdict/synthetic.hpp"
#include "corrdict/volume.hpp"

namespace corrdict::cli {
namespace fs = std::filesystem;

namespace {

// A required option absent from every configuration layer.
class MissingOption : public InvalidConfig {
 public:
  using InvalidConfig::InvalidConfig;
};

struct Key {
  std::string name;
  std::string fallback;
  std::string help;
  bool is_flag = false;
};

const std::vector<Key>& common_keys() {
  static const std::vector<Key> keys = {
      {"seed", "0", "master seed; every random stream derives from it"},
      {"threads", "", "worker threads (0 = all; env CORRDICT_THREADS)"},
      {"out", "", "output directory"},
  };
  return keys;
}

const std::vector<Key>& learner_keys() {
  static const std::vector<Key> keys = {
      {"data", "", "dataset directory or signal matrix file"},
      {"truth", "", "true dictionary (defaults to the dataset's)"},
      {"alg", "ksvd", "ksvd | en_dl | grouped_ksvd"},
      {"atoms", "10", "number of atoms K"},
      {"sparsity", "3", "OMP sparsity T"},
      {"residual_tol", "1e-9", "OMP residual tolerance"},
      {"lambda", "0.1", "elastic-net weight"},
      {"gamma", "1", "elastic-net l2/l1 ratio"},
      {"en_tol", "1e-6", "elastic-net relative change tolerance"},
      {"en_iters", "500", "elastic-net inner iteration cap"},
      {"group_threshold", "0.7", "grouped K-SVD correlation threshold"},
      {"iters", "100", "outer iteration cap"},
      {"outer_tol", "1e-4", "outer relative error change tolerance"},
      {"standardize", "false", "center and scale each signal to unit variance", true},
  };
  return keys;
}

std::vector<Key> keys_for(const std::string& command) {
  std::vector<Key> keys = common_keys();
  auto add = [&keys](const std::vector<Key>& more) {
    keys.insert(keys.end(), more.begin(), more.end());
  };
  if (command == "synth") {
    const SyntheticSpec d;
    add({
        {"grid", to_string(d.grid), "grid as NXxNYxNZ"},
        {"networks", std::to_string(d.n_networks), "number of networks"},
        {"blobs", std::to_string(d.blobs_per_network), "blobs per network"},
        {"radius_min", format_double(d.blob_radius_min), "smallest blob radius (voxels)"},
        {"radius_max", format_double(d.blob_radius_max), "largest blob radius (voxels)"},
        {"timepoints", std::to_string(d.n_timepoints), "time points per signal"},
        {"model", std::string(to_string(d.time_series_model)),
         "sinusoid_random_phase | smoothed_gaussian_walk"},
        {"noise", format_double(d.noise_sigma), "noise standard deviation"},
        {"sparsity", std::to_string(d.sparsity_per_voxel), "networks kept per voxel"},
        {"pair_corr", "", "correlation of networks 0 and 1 (unset = independent)"},
    });
  } else if (command == "train") {
    add(learner_keys());
  } else if (command == "partial") {
    add(learner_keys());
    add({{"fractions", "", "comma separated fractions in (0, 1]"}});
  } else if (command == "segment") {
    add({
        {"codes", "", "coefficient matrix (K x voxels)"},
        {"grid", "", "grid as NXxNYxNZ"},
        {"clusters", "", "number of clusters (default: K)"},
        {"restarts", "5", "k-medians restarts"},
        {"kmeans_iters", "100", "k-medians iteration cap"},
        {"normalize", "false", "l1-normalize each voxel's code", true},
        {"mask", "", "int32 CDMX voxel mask (nonzero = inside)"},
        {"slices", "", "comma separated 0-based z slices to render"},
        {"truth", "", "int32 CDMX truth label volume for scoring"},
    });
  } else if (command == "eval") {
    add({
        {"learned", "", "learned dictionary"},
        {"truth", "", "true dictionary"},
        {"threshold", "0.01", "recovery threshold on 1 - |<d, d0>|"},
    });
  }
  return keys;
}

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

// Flag values captured by CLI11, later layered over file/preset/defaults.
struct Invocation {
  std::string command;
  std::vector<Key> keys;
  std::map<std::string, std::string> strings;
  std::map<std::string, bool> flags;
  std::string preset, config_file, manifest;
  CLI::App* app = nullptr;
};

Settings resolve(const Invocation& inv) {
  KeyValues merged;
  for (const Key& k : inv.keys) merged[k.name] = k.fallback;
  if (const char* env = std::getenv("CORRDICT_THREADS"); env && *env) merged["threads"] = env;

  auto overlay = [&](const KeyValues& layer) {
    for (const auto& [k, v] : layer) {
      if (merged.count(k)) merged[k] = v;
    }
  };
  if (!inv.preset.empty()) overlay(preset_values(inv.preset));
  if (!inv.config_file.empty()) {
    const KeyValues file = read_config_file(inv.config_file);
    for (const auto& [k, v] : file) {
      if (!merged.count(k)) throw InvalidConfig("unknown key '" + k + "' in " + inv.config_file);
    }
    overlay(file);
  }
  if (!inv.manifest.empty()) overlay(read_manifest(inv.manifest, inv.command).config);
  for (const Key& k : inv.keys) {
    if (inv.app->count(flag_name(k.name)) == 0) continue;
    merged[k.name] = k.is_flag ? (inv.flags.at(k.name) ? "true" : "false") : inv.strings.at(k.name);
  }

  Settings s(std::move(merged));
  const long long threads = s.has("threads") ? s.integer("threads") : 0;
  if (threads < 0 || threads > 4096) throw InvalidConfig("threads must lie in [0, 4096]");
  s.set("threads", std::to_string(resolve_threads(static_cast<int>(threads))));
  return s;
}

std::uint64_t seed_of(const Settings& s) {
  const long long v = s.integer("seed");
  if (v < 0) throw InvalidConfig("seed must be >= 0");
  return static_cast<std::uint64_t>(v);
}

int int_of(const Settings& s, const std::string& key) {
  const long long v = s.integer(key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw InvalidConfig(key + " out of range");
  }
  return static_cast<int>(v);
}

fs::path require_path(const Settings& s, const std::string& key) {
  if (!s.has(key)) throw MissingOption("missing required option " + flag_name(key));
  return fs::path(s.str(key));
}

class Manifest {
 public:
  Manifest(std::string command, const Settings& settings)
      : command_(std::move(command)), settings_(settings) {}

  void input(const std::string& name, const fs::path& p) { inputs_[name] = p.string(); }
  void output(const std::string& name, const fs::path& p) { outputs_[name] = p.string(); }

  template <typename Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Stop {
      Manifest* m;
      std::string name;
      std::chrono::steady_clock::time_point t0;
      ~Stop() {
        m->runtime_[name] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
    } stop{this, name, t0};
    return fn();
  }

  void write(const fs::path& dir) const {
    nlohmann::json rec;
    rec["command"] = command_;
    rec["version"] = std::string(kVersion);
    rec["seed"] = settings_.str("seed");
    rec["config"] = settings_.values();
    rec["artifacts"] = {{"inputs", inputs_}, {"outputs", outputs_}};
    rec["runtime_seconds"] = runtime_;
    std::ofstream out(dir / "manifest.jsonl", std::ios::app);
    out << rec.dump() << '\n';
    if (!out) throw IoError("cannot write manifest in " + dir.string());
  }

 private:
  std::string command_;
  const Settings& settings_;
  std::map<std::string, std::string> inputs_, outputs_;
  std::map<std::string, double> runtime_;
};

fs::path prepare_out(const Settings& s) {
  const fs::path out = require_path(s, "out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  return out;
}

std::ofstream open_csv(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot open for writing: " + p.string());
  return f;
}

// --- synth ------------------------------------------------------------------

int cmd_synth(const Settings& s) {
  const fs::path out = prepare_out(s);
  SyntheticSpec spec;
  spec.grid = parse_grid(s.str("grid"));
  spec.n_networks = int_of(s, "networks");
  spec.blobs_per_network = int_of(s, "blobs");
  spec.blob_radius_min = s.real("radius_min");
  spec.blob_radius_max = s.real("radius_max");
  spec.n_timepoints = int_of(s, "timepoints");
  spec.time_series_model = parse_time_series_model(s.str("model"));
  spec.noise_sigma = s.real("noise");
  spec.sparsity_per_voxel = int_of(s, "sparsity");
  spec.rng_seed = seed_of(s);
  if (s.has("pair_corr")) spec = correlated_pair_spec(spec, s.real("pair_corr"));

  Manifest m("synth", s);
  const SyntheticDataset ds = m.stage("generate", [&] { return generate(spec); });
  m.stage("write", [&] {
    write_cdmx(out / "signals.cdmx", ds.signals);
    write_cdmx(out / "true_dictionary.cdmx", ds.true_dictionary.atoms());
    write_cdmx(out / "true_coefficients.cdmx", ds.true_coefficients);
    write_cdmx(out / "noise.cdmx", ds.noise_realization);
    write_cdmx(out / "truth_labels.cdmx",
               labels_to_matrix(dominant_network_labels(ds.true_coefficients, spec.grid)));
    fs::create_directories(out / "maps");
    for (std::size_t k = 0; k < ds.network_maps.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "network_%02zu.cdmx", k);
      write_cdmx(out / "maps" / name, volume_to_matrix(ds.network_maps[k], spec.grid));
    }
    return 0;
  });
  for (const char* f : {"signals.cdmx", "true_dictionary.cdmx", "true_coefficients.cdmx",
                        "noise.cdmx", "truth_labels.cdmx"}) {
    m.output(fs::path(f).stem().string(), out / f);
  }
  m.output("maps", out / "maps");
  m.write(out);
  std::cout << "wrote " << ds.signals.cols() << " signals of length " << ds.signals.rows()
            << " to " << out.string() << '\n';
  return kExitOk;
}

// --- train / partial --------------------------------------------------------

struct Dataset {
  SignalMatrix signals;
  std::optional<Dictionary> truth;
};

Dataset load_dataset(const Settings& s, Manifest& m) {
  const fs::path data = require_path(s, "data");
  fs::path signals = data;
  fs::path truth = s.has("truth") ? fs::path(s.str("truth")) : fs::path();
  if (fs::is_directory(data)) {
    signals = data / "signals.cdmx";
    if (truth.empty() && fs::exists(data / "true_dictionary.cdmx")) {
      truth = data / "true_dictionary.cdmx";
    }
  }
  Dataset ds;
  ds.signals = read_matrix(signals);
  if (s.flag("standardize")) ds.signals = standardize_columns(ds.signals);
  m.input("signals", signals);
  if (!truth.empty()) {
    ds.truth = Dictionary(read_matrix(truth));
    m.input("truth", truth);
    if (ds.truth->n_dim() != ds.signals.rows()) {
      throw DimensionMismatch("true dictionary has " + std::to_string(ds.truth->n_dim()) +
                              " rows, signals have " + std::to_string(ds.signals.rows()));
    }
  }
  return ds;
}

LearnerConfig learner_config(const Settings& s) {
  LearnerConfig c;
  c.algorithm = parse_algorithm(s.str("alg"));
  c.n_atoms = s.integer("atoms");
  c.omp.max_sparsity = int_of(s, "sparsity");
  c.omp.residual_tol = s.real("residual_tol");
  c.en.lambda = s.real("lambda");
  c.en.gamma = s.real("gamma");
  c.en.rel_change_tol = s.real("en_tol");
  c.en.max_iters = int_of(s, "en_iters");
  c.group_threshold = s.real("group_threshold");
  c.max_outer_iters = int_of(s, "iters");
  c.outer_rel_tol = s.real("outer_tol");
  c.rng_seed = seed_of(s);
  c.threads = int_of(s, "threads");
  return c;
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

int cmd_train(const Settings& s) {
  const fs::path out = prepare_out(s);
  Manifest m("train", s);
  const Dataset ds = m.stage("load", [&] { return load_dataset(s, m); });
  const LearnerConfig cfg = learner_config(s);
  LearnOptions opts;
  if (ds.truth) opts.reference = &*ds.truth;
  const LearnResult r = m.stage("train", [&] { return learn(ds.signals, cfg, opts); });

  m.stage("write", [&] {
    write_cdmx(out / "dictionary.cdmx", r.dictionary.atoms());
    write_cdmx(out / "coefficients.cdmx", r.coefficients);
    std::ofstream h = open_csv(out / "history.csv");
    h << "iter,recon_error,objective,dict_distance\n";
    for (const IterationRecord& rec : r.history) {
      h << rec.iter << ',' << format_double(rec.recon_error) << ',' << optional_cell(rec.objective)
        << ',' << optional_cell(rec.dict_distance) << '\n';
    }
    return 0;
  });
  m.output("dictionary", out / "dictionary.cdmx");
  m.output("coefficients", out / "coefficients.cdmx");
  m.output("history", out / "history.csv");
  m.write(out);

  std::cout << to_string(cfg.algorithm) << ": " << r.history.size() << " iterations";
  if (!r.history.empty()) {
    std::cout << ", recon_error " << format_double(r.history.back().recon_error);
    if (r.history.back().dict_distance) {
      std::cout << ", dict_distance " << format_double(*r.history.back().dict_distance);
    }
  }
  std::cout << '\n';
  return kExitOk;
}

int cmd_partial(const Settings& s) {
  const fs::path out = prepare_out(s);
  const std::vector<double> fractions = s.reals("fractions");
  if (fractions.empty()) throw InvalidConfig("--fractions needs at least one value");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw InvalidConfig("fractions must lie in (0, 1]");
  }
  Manifest m("partial", s);
  const Dataset ds = m.stage("load", [&] { return load_dataset(s, m); });
  if (!ds.truth) throw InvalidConfig("partial needs a true dictionary (--truth or dataset dir)");
  const LearnerConfig cfg = learner_config(s);
  const auto l = static_cast<std::size_t>(ds.signals.cols());

  std::ofstream csv = open_csv(out / "partial.csv");
  csv << "fraction,dict_distance,recon_error\n";
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const double f = fractions[fi];
    const auto count = std::min(
        l, static_cast<std::size_t>(std::ceil(f * static_cast<double>(l) - 1e-9)));
    SignalMatrix subset;
    if (count == l) {
      subset = ds.signals;
    } else {
      Rng rng = Rng::substream(cfg.rng_seed, "partial/" + std::to_string(fi));
      auto picks = rng.sample_without_replacement(l, count);
      std::sort(picks.begin(), picks.end());
      subset.resize(ds.signals.rows(), static_cast<Eigen::Index>(count));
      for (std::size_t j = 0; j < count; ++j) {
        subset.col(static_cast<Eigen::Index>(j)) = ds.signals.col(static_cast<Eigen::Index>(picks[j]));
      }
    }
    const LearnResult r = m.stage("fraction_" + std::to_string(fi),
                                  [&] { return learn(subset, cfg); });
    const double dist = dictionary_distance(*ds.truth, r.dictionary, 0.01).total_distance;
    const double err = reconstruction_error(subset, r.dictionary, r.coefficients);
    csv << format_double(f) << ',' << format_double(dist) << ',' << format_double(err) << '\n';
    std::cout << "fraction " << format_double(f) << ": " << count << " signals, dict_distance "
              << format_double(dist) << '\n';
  }
  csv.close();
  if (!csv) throw IoError("write failed: " + (out / "partial.csv").string());
  m.output("partial", out / "partial.csv");
  m.write(out);
  return kExitOk;
}

// --- segment ----------------------------------------------------------------

int cmd_segment(const Settings& s) {
  const fs::path out = prepare_out(s);
  Manifest m("segment", s);
  const fs::path codes_path = require_path(s, "codes");
  if (!s.has("grid")) throw MissingOption("missing required option --grid");
  const Grid3 grid = parse_grid(s.str("grid"));
  const CoefficientMatrix codes = read_matrix(codes_path);
  m.input("codes", codes_path);
  if (codes.cols() != grid.voxels()) {
    throw DimensionMismatch("coefficient matrix has " + std::to_string(codes.cols()) +
                            " columns but grid " + to_string(grid) + " has " +
                            std::to_string(grid.voxels()) + " voxels");
  }

  SegmentOptions opts;
  opts.kmeans.n_clusters = s.has("clusters") ? int_of(s, "clusters") : static_cast<int>(codes.rows());
  opts.kmeans.n_restarts = int_of(s, "restarts");
  opts.kmeans.max_iters = int_of(s, "kmeans_iters");
  opts.kmeans.rng_seed = seed_of(s);
  opts.kmeans.threads = int_of(s, "threads");
  opts.normalize_columns_l1 = s.flag("normalize");
  std::vector<std::int32_t> mask;
  if (s.has("mask")) {
    mask = matrix_to_labels(read_cdmx_int(fs::path(s.str("mask"))), grid).labels;
    opts.mask = &mask;
    m.input("mask", s.str("mask"));
  }
  std::vector<Eigen::Index> slices;
  for (long long z : s.integers("slices")) {
    if (z < 0 || z >= grid.nz) {
      throw InvalidConfig("slice " + std::to_string(z) + " outside [0, " +
                          std::to_string(grid.nz) + ")");
    }
    slices.push_back(static_cast<Eigen::Index>(z));
  }
  std::optional<LabelVolume> truth;
  if (s.has("truth")) {
    truth = matrix_to_labels(read_cdmx_int(fs::path(s.str("truth"))), grid);
    m.input("truth", s.str("truth"));
  }

  const Segmentation seg = m.stage("cluster", [&] { return segment_volume(codes, grid, opts); });

  m.stage("write", [&] {
    write_cdmx(out / "labels.cdmx", labels_to_matrix(seg.volume));
    m.output("labels", out / "labels.cdmx");
    std::ofstream sizes = open_csv(out / "cluster_sizes.csv");
    sizes << "label,size\n";
    const auto counts = cluster_sizes(seg.volume);
    for (std::size_t c = 0; c < counts.size(); ++c) sizes << c << ',' << counts[c] << '\n';
    m.output("cluster_sizes", out / "cluster_sizes.csv");
    for (Eigen::Index z : slices) {
      char name[32];
      std::snprintf(name, sizeof name, "slice_%03lld.pgm", static_cast<long long>(z));
      write_pgm_slice(out / name, seg.volume, z);
      m.output(name, out / name);
    }
    if (truth) {
      const SegmentationScore sc = score_segmentation(seg.volume, *truth);
      std::ofstream f = open_csv(out / "scores.csv");
      f << "purity,agreement\n" << format_double(sc.purity) << ',' << format_double(sc.agreement)
        << '\n';
      m.output("scores", out / "scores.csv");
      std::cout << "purity " << format_double(sc.purity) << ", agreement "
                << format_double(sc.agreement) << '\n';
    }
    return 0;
  });
  m.write(out);
  std::cout << "segmented " << grid.voxels() << " voxels into " << opts.kmeans.n_clusters
            << " clusters plus background, inertia " << format_double(seg.kmeans.inertia) << '\n';
  return kExitOk;
}

// --- eval -------------------------------------------------------------------

int cmd_eval(const Settings& s) {
  const fs::path out = prepare_out(s);
  Manifest m("eval", s);
  const fs::path learned_path = require_path(s, "learned");
  const fs::path truth_path = require_path(s, "truth");
  const Dictionary learned(read_matrix(learned_path));
  const Dictionary truth(read_matrix(truth_path));
  m.input("learned", learned_path);
  m.input("truth", truth_path);
  const DictionaryDistanceReport rep = dictionary_distance(truth, learned, s.real("threshold"));

  std::ofstream f = open_csv(out / "eval.csv");
  f << "true_atom,learned_atom,distance,recovered\n";
  for (const AtomMatch& a : rep.per_atom_best_match) {
    f << a.true_atom << ',' << a.learned_atom << ',' << format_double(a.distance) << ','
      << (a.distance < rep.recovery_threshold ? 1 : 0) << '\n';
  }
  f << "summary,," << format_double(rep.total_distance) << ','
    << format_double(rep.recovery_rate) << '\n';
  f.close();
  if (!f) throw IoError("write failed: " + (out / "eval.csv").string());
  m.output("eval", out / "eval.csv");
  m.write(out);
  std::cout << "dict_distance " << format_double(rep.total_distance) << ", recovery_rate "
            << format_double(rep.recovery_rate) << '\n';
  return kExitOk;
}

int dispatch(const std::string& command, const Settings& s) {
  if (command == "synth") return cmd_synth(s);
  if (command == "train") return cmd_train(s);
  if (command == "partial") return cmd_partial(s);
  if (command == "segment") return cmd_segment(s);
  return cmd_eval(s);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Correlated-sparsity dictionary learning experiments", "corrdict"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "generate a synthetic dataset"},
      {"train", "learn a dictionary"},
      {"partial", "train on growing fractions of the signals"},
      {"segment", "cluster voxel codes into a label volume"},
      {"eval", "compare a learned dictionary with the truth"},
  };
  std::vector<std::unique_ptr<Invocation>> invocations;
  for (const auto& [name, help] : commands) {
    auto inv = std::make_unique<Invocation>();
    inv->command = name;
    inv->keys = keys_for(name);
    inv->app = app.add_subcommand(name, help);
    inv->app->add_option("--preset", inv->preset, "paper-desk | tiny");
    inv->app->add_option("--config", inv->config_file, "flat key = value file");
    inv->app->add_option("--from-manifest", inv->manifest, "rerun the last matching record");
    for (const Key& k : inv->keys) {
      if (k.is_flag) {
        inv->app->add_flag(flag_name(k.name), inv->flags[k.name], k.help);
      } else {
        inv->app->add_option(flag_name(k.name), inv->strings[k.name], k.help);
      }
    }
    invocations.push_back(std::move(inv));
  }

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (const auto& inv : invocations) {
    if (!inv->app->parsed()) continue;
    try {
      const Settings s = resolve(*inv);
      return dispatch(inv->command, s);
    } catch (const NumericalError& e) {
      std::cerr << "corrdict " << inv->command << ": numerical failure: " << e.what() << '\n';
      return kExitNumerical;
    } catch (const std::exception& e) {
      std::cerr << "corrdict " << inv->command << ": " << e.what() << '\n';
      if (dynamic_cast<const MissingOption*>(&e)) std::cerr << inv->app->help();
      return kExitUsage;
    }
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace corrdict::cli
