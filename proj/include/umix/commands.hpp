/*
 * Copyright 2026 The umix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line harness. Exit codes: 0 success, 1 configuration or validation
// error, 2 numerical failure (non-finite loss, failed gradient check).

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "umix/ablation.hpp"
#include "umix/analysis.hpp"
#include "umix/checkpoint.hpp"
#include "umix/config.hpp"
#include "umix/data.hpp"
#include "umix/gradcheck.hpp"
#include "umix/train.hpp"

namespace umix {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2 };

/// Parses "HxW" (e.g. "64x64").
inline std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  auto num = [&](const std::string& part) -> std::size_t {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("size '" + s + "' is not of the form HxW");
    return std::stoul(part);
  };
  if (x == std::string::npos)
    throw ConfigError("size '" + s + "' is not of the form HxW");
  const std::size_t h = num(s.substr(0, x)), w = num(s.substr(x + 1));
  if (h == 0 || w == 0) throw ConfigError("size '" + s + "' has a zero side");
  return {h, w};
}

namespace cli {

struct DataArgs {
  std::string data_dir;
  std::uint64_t dataset_seed = 0;
  std::size_t samples = 200;
  double noise = 0.05;
  double val_fraction = 0.2;

  void add(CLI::App* app) {
    app->add_option("--data", data_dir, "Directory written by gen-data");
    app->add_option("--dataset-seed", dataset_seed, "Seed of the generated dataset");
    app->add_option("--samples", samples, "Generated dataset size");
    app->add_option("--noise", noise, "Pixel noise sigma of the generated dataset");
    app->add_option("--val-fraction", val_fraction, "Held-out fraction")
        ->check(CLI::Range(0.0, 1.0));
  }

  /// Loads --data or generates a dataset matching the model's input.
  SyntheticDataset load(const ModelConfig& c) const {
    SyntheticDataset ds;
    if (!data_dir.empty()) {
      ds = load_dataset((std::filesystem::path(data_dir) / "dataset.bin").string());
    } else {
      DatasetOptions o;
      o.seed = dataset_seed;
      o.count = samples;
      o.noise = noise;
      o.height = c.img_h;
      o.width = c.img_w;
      o.num_classes = c.num_classes;
      o.size_multiple = c.stride(c.num_stages);
      ds = generate_dataset(o);
    }
    if (ds.options.height != c.img_h || ds.options.width != c.img_w)
      throw ConfigError("dataset images are " + std::to_string(ds.options.height) +
                        "x" + std::to_string(ds.options.width) +
                        " but the model expects " + std::to_string(c.img_h) +
                        "x" + std::to_string(c.img_w));
    if (ds.options.num_classes != c.num_classes)
      throw ConfigError("dataset has " + std::to_string(ds.options.num_classes) +
                        " classes but the model predicts " +
                        std::to_string(c.num_classes));
    return ds;
  }
};

inline ModelConfig config_or_default(const std::string& path) {
  return path.empty() ? ModelConfig{} : load_config(path);
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("cannot write '" + p.string() + "'");
  f << text;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline int gen_data(std::uint64_t seed, std::size_t n, const std::string& size,
                    std::size_t classes, double noise, std::size_t stages,
                    const std::string& out_dir, std::ostream& out) {
  DatasetOptions o;
  o.seed = seed;
  o.count = n;
  std::tie(o.height, o.width) = parse_size(size);
  o.num_classes = classes;
  o.noise = noise;
  o.size_multiple = std::size_t{1} << (stages + 1);
  const SyntheticDataset ds = generate_dataset(o);
  std::filesystem::create_directories(out_dir);
  const auto dir = std::filesystem::path(out_dir);
  save_dataset((dir / "dataset.bin").string(), ds);
  std::ostringstream m;
  m << "seed=" << o.seed << "\ncount=" << ds.size() << "\nheight=" << o.height
    << "\nwidth=" << o.width << "\nclasses=" << o.num_classes
    << "\nnoise=" << fmt(o.noise) << '\n';
  const auto hist = ds.class_histogram();
  for (std::size_t c = 0; c < hist.size(); ++c)
    m << "class_pixels_" << c << '=' << hist[c] << '\n';
  write_file(dir / "manifest.txt", m.str());
  out << m.str();
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::string out_dir;
  std::string resume;
  std::uint64_t seed = 0;
  TrainOptions options;
  DataArgs data;
};

inline int train_cmd(const TrainArgs& a, std::ostream& out) {
  const ModelConfig config = config_or_default(a.config);
  const SyntheticDataset ds = a.data.load(config);
  auto [train_set, val_set] = split_dataset(ds, a.data.val_fraction);
  TrainState st = a.resume.empty() ? init_train_state(config, a.seed)
                                   : restore_train_state(load_checkpoint(a.resume));
  if (!(st.model.config() == config) && !a.config.empty())
    throw ConfigError("--config does not match the resumed checkpoint");

  std::ostringstream txt;
  nlohmann::json js;
  js["config"] = to_json(st.model.config());
  js["seed"] = a.seed;
  js["epochs"] = nlohmann::json::array();
  auto log = [&](const EpochMetrics& m) {
    const std::string line = format_epoch(m);
    out << line << '\n';
    txt << line << '\n';
    nlohmann::json e = {{"epoch", m.epoch}, {"loss", m.loss},
                        {"train_miou", m.train_miou}};
    if (m.val_miou) e["val_miou"] = *m.val_miou;
    js["epochs"].push_back(e);
  };
  train(st, train_set, val_set, a.options, log);

  std::ostringstream tail;
  tail << "params=" << st.model.parameter_count() << "\nsteps=" << st.step
       << "\nparam_hash=" << parameter_hash(st.model) << '\n';
  if (!val_set.empty()) {
    const EvalResult r = evaluate(st.model, val_set);
    tail << "final_val_miou=" << fmt(r.miou) << '\n';
    js["final_val_miou"] = r.miou;
  }
  out << tail.str();
  txt << tail.str();
  js["params"] = st.model.parameter_count();
  js["steps"] = st.step;
  js["param_hash"] = parameter_hash(st.model);

  std::filesystem::create_directories(a.out_dir);
  const auto dir = std::filesystem::path(a.out_dir);
  save_checkpoint((dir / "checkpoint.umix").string(), make_checkpoint(st));
  write_file(dir / "metrics.txt", txt.str());
  write_file(dir / "metrics.json", js.dump(2) + "\n");
  return kExitOk;
}

inline int eval_cmd(const std::string& checkpoint, const std::string& split,
                    const DataArgs& data, std::ostream& out) {
  const TrainState st = restore_train_state(load_checkpoint(checkpoint));
  const SyntheticDataset ds = data.load(st.model.config());
  auto [train_set, val_set] = split_dataset(ds, data.val_fraction);
  std::span<const Sample> samples;
  if (split == "val") samples = val_set;
  else if (split == "train") samples = train_set;
  else samples = ds.samples;
  const EvalResult r = evaluate(st.model, samples);
  out << "samples=" << samples.size() << "\nmiou=" << fmt(r.miou) << '\n';
  for (std::size_t c = 0; c < r.per_class.size(); ++c)
    out << "iou_class_" << c << '='
        << (r.per_class[c] ? fmt(*r.per_class[c]) : std::string("absent")) << '\n';
  return kExitOk;
}

inline void write_group(std::ostream& out, const GradCheckGroup& g) {
  for (const auto& c : g.cases)
    for (const auto& l : c.report.leaves)
      out << "leaf group=" << g.name << " case=" << c.name << " name=" << l.name
          << " elements=" << l.elements
          << (l.structural_zero ? " check=structural_zero" : " check=relative")
          << " max_rel_error=" << l.max_rel_error
          << " max_abs_analytic=" << l.max_abs_analytic
          << " max_abs_numeric=" << l.max_abs_numeric
          << " status=" << (l.passed ? "pass" : "FAIL") << '\n';
  out << "group name=" << g.name << " tol=" << g.tolerance
      << " max_rel_error=" << g.max_rel_error()
      << " status=" << (g.passed() ? "pass" : "FAIL") << '\n';
}

inline int gradcheck_cmd(const std::string& config_path,
                         std::optional<double> tol, std::uint64_t seed,
                         std::ostream& out) {
  const ModelConfig base = config_or_default(config_path);
  const GradCheckSuite s =
      run_gradcheck_suite(base, seed, tol.value_or(1e-6), tol.value_or(1e-6),
                          tol.value_or(1e-4));
  out << std::setprecision(6);
  write_group(out, s.ops);
  write_group(out, s.stage);
  write_group(out, s.model);
  out << "gradcheck status=" << (s.passed() ? "pass" : "FAIL") << '\n';
  return s.passed() ? kExitOk : kExitNumerical;
}

inline int flops_cmd(const std::string& config_path, const std::string& input,
                     bool per_layer, std::ostream& out) {
  const ModelConfig c = config_or_default(config_path);
  std::size_t h = c.img_h, w = c.img_w;
  if (!input.empty()) std::tie(h, w) = parse_size(input);
  ModelConfig sized = c;
  sized.img_h = h;
  sized.img_w = w;
  sized.validate();
  out << "input=" << h << 'x' << w << '\n';
  write_report(out, count_flops(c, h, w), per_layer);
  return kExitOk;
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("--seeds expects a comma-separated list of integers");
    out.push_back(std::stoull(item));
  }
  if (out.empty()) throw ConfigError("--seeds is empty");
  return out;
}

struct AblateArgs {
  std::string config;
  std::string seeds = "0,1,2";
  std::string flops_input;
  std::string out_file;
  TrainOptions options;
  DataArgs data;
};

inline int ablate_cmd(const AblateArgs& a, std::ostream& out) {
  const ModelConfig base = config_or_default(a.config);
  const auto seeds = parse_seeds(a.seeds);
  const SyntheticDataset ds = a.data.load(base);
  auto [train_set, val_set] = split_dataset(ds, a.data.val_fraction);
  std::size_t fh = base.img_h, fw = base.img_w;
  if (!a.flops_input.empty()) std::tie(fh, fw) = parse_size(a.flops_input);
  const auto rows = run_ablation(
      base, train_set, val_set, seeds, a.options, fh, fw,
      [&](const std::string& arm, std::uint64_t seed, double miou) {
        out << "run arm=\"" << arm << "\" seed=" << seed
            << " val_miou=" << fmt(miou) << '\n';
      });
  std::ostringstream table;
  table << "flops_input=" << fh << 'x' << fw << '\n';
  write_ablation(table, rows);
  out << table.str();
  if (!a.out_file.empty()) write_file(a.out_file, table.str());
  return kExitOk;
}

inline void add_train_options(CLI::App* app, TrainOptions& o) {
  app->add_option("--epochs", o.epochs, "Total epochs");
  app->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  app->add_option("--batch", o.batch_size, "Samples per step")
      ->check(CLI::PositiveNumber);
  app->add_flag("--poly-decay", o.poly_decay, "Linear decay of lr to zero");
}

}  // namespace cli

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"umix: U-MixFormer decoder harness"};
  app.require_subcommand(1);

  std::uint64_t gd_seed = 0;
  std::size_t gd_n = 200, gd_classes = 4, gd_stages = 4;
  std::string gd_size = "64x64", gd_out;
  double gd_noise = 0.05;
  auto* gd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gd->add_option("--seed", gd_seed, "Dataset seed");
  gd->add_option("--n", gd_n, "Number of samples");
  gd->add_option("--size", gd_size, "Image size HxW");
  gd->add_option("--classes", gd_classes, "Number of classes K");
  gd->add_option("--noise", gd_noise, "Pixel noise sigma");
  gd->add_option("--stages", gd_stages, "Model stages N; sizes must divide by 2^(N+1)");
  gd->add_option("--out", gd_out, "Output directory")->required();

  cli::TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", ta.config, "Model config (JSON)");
  tr->add_option("--out", ta.out_dir, "Output directory")->required();
  tr->add_option("--seed", ta.seed, "Initialization and shuffling seed");
  tr->add_option("--resume", ta.resume, "Continue from a checkpoint");
  cli::add_train_options(tr, ta.options);
  ta.data.add(tr);

  std::string ev_ckpt, ev_split = "val";
  cli::DataArgs ev_data;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
  ev->add_option("--split", ev_split, "val, train or all")
      ->check(CLI::IsMember({"val", "train", "all"}));
  ev_data.add(ev);

  std::string gc_config;
  std::optional<double> gc_tol;
  std::uint64_t gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_option("--config", gc_config, "Config supplying the attention wiring");
  gc->add_option("--tol", gc_tol, "Tolerance for all groups (default 1e-6/1e-6/1e-4)");
  gc->add_option("--seed", gc_seed, "Seed of the random leaves");

  std::string fl_config, fl_input;
  bool fl_per_layer = false;
  auto* fl = app.add_subcommand("flops", "Analytic parameter and FLOP report");
  fl->add_option("--config", fl_config, "Model config (JSON)");
  fl->add_option("--input", fl_input, "Input size HxW");
  fl->add_flag("--per-layer", fl_per_layer, "Emit one record per layer");

  cli::AblateArgs aa;
  aa.options.epochs = 10;
  auto* ab = app.add_subcommand("ablate", "Four-arm key/value wiring ablation");
  ab->add_option("--config", aa.config, "Base model config (JSON)");
  ab->add_option("--seeds", aa.seeds, "Comma-separated seeds");
  ab->add_option("--flops-input", aa.flops_input, "Input size HxW for the cost columns");
  ab->add_option("--out", aa.out_file, "Also write the table to this file");
  cli::add_train_options(ab, aa.options);
  aa.data.add(ab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gd)
      return cli::gen_data(gd_seed, gd_n, gd_size, gd_classes, gd_noise,
                           gd_stages, gd_out, out);
    if (*tr) return cli::train_cmd(ta, out);
    if (*ev) return cli::eval_cmd(ev_ckpt, ev_split, ev_data, out);
    if (*gc) return cli::gradcheck_cmd(gc_config, gc_tol, gc_seed, out);
    if (*fl) return cli::flops_cmd(fl_config, fl_input, fl_per_layer, out);
    if (*ab) return cli::ablate_cmd(aa, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace umix
