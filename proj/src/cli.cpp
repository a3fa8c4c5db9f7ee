/* Copyright 2026 The IDC Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "idc/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "idc/attacks.hpp"
#include "idc/checkpoint.hpp"
#include "idc/classifier.hpp"
#include "idc/config.hpp"
#include "idc/dataset.hpp"
#include "idc/image_io.hpp"
#include "idc/train.hpp"
#include "idc/util.hpp"

namespace idc {
namespace {

namespace fs = std::filesystem;

void WriteJsonFile(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Json::parse(in);
}

std::vector<Json> ReadJsonLines(const fs::path& path) {
  std::vector<Json> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(Json::parse(line));
  }
  return out;
}

DataRange ParseRange(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("range must look like lo,hi");
  DataRange r{std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  if (!(r.lo < r.hi)) throw std::invalid_argument("range needs lo < hi");
  return r;
}

// --- gen-labels -----------------------------------------------------------

struct GenLabelsArgs {
  std::int64_t classes = 10;
  std::string shape = "3x32x32";
  std::string range = "-1,1";
  std::uint64_t seed = 0;
  std::string output = "labels";
  bool grid = false;
};

int GenLabels(const GenLabelsArgs& a, std::ostream& out) {
  const auto shape = ParseLabelShape(a.shape);
  const auto range = ParseRange(a.range);
  auto book = generate_codebook(a.classes, shape, range, a.seed);
  const fs::path dir = ResolveOutputDir(a.output);
  fs::create_directories(dir);
  SaveCodebookFile(book, (dir / "codebook.idcl").string());
  WriteJsonFile(dir / "gen_labels.json",
                Json{{"version", std::string(kVersionTag)},
                     {"command", "gen-labels"},
                     {"classes", a.classes},
                     {"shape", ToString(shape)},
                     {"range", {range.lo, range.hi}},
                     {"seed", a.seed},
                     {"effective_seed", book.effective_seed},
                     {"basis_min", book.basis_min},
                     {"basis_max", book.basis_max}});
  if (a.grid) {
    WritePpm(MakeImageGrid({book.labels}, range), (dir / "labels.ppm").string());
  }
  out << "wrote " << a.classes << " labels of shape " << ToString(shape) << " to "
      << (dir / "codebook.idcl").string() << "\n";
  return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  std::string config_file;
  std::string resume;
  std::optional<std::string> output, dataset, data_path, subset, alpha_ramp, u;
  std::optional<std::int64_t> resolution, num_samples, batch_size, steps, ts, cm, nr,
      checkpoint_every, log_every;
  std::optional<double> lr, alpha, hinge, s_max, ema;
  std::optional<std::uint64_t> seed;
  bool augment = false;
};

TrainConfig BuildTrainConfig(const TrainArgs& a) {
  TrainConfig c;
  // Desk-scale predictor unless a config file says otherwise.
  c.output_dir = "train_run";
  if (!a.config_file.empty()) c = TrainConfigFromJson(ReadJsonFile(a.config_file), c);
  if (a.output) c.output_dir = *a.output;
  if (a.dataset) c.data.name = *a.dataset;
  if (a.data_path) c.data.path = *a.data_path;
  if (a.subset) c.data.classes = ParseIntList(*a.subset);
  if (a.resolution) c.data.resolution = *a.resolution;
  if (a.num_samples) c.data.num_samples = *a.num_samples;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.steps) c.steps = *a.steps;
  if (a.ts) c.num_steps = *a.ts;
  if (a.cm) c.predictor.model_channels = *a.cm;
  if (a.u) c.predictor.channel_multipliers = ParseIntList(*a.u);
  if (a.nr) c.predictor.res_blocks = *a.nr;
  if (a.checkpoint_every) c.checkpoint_every = *a.checkpoint_every;
  if (a.log_every) c.log_every = *a.log_every;
  if (a.lr) c.learning_rate = *a.lr;
  if (a.alpha) c.alpha.start = c.alpha.end = *a.alpha;
  if (a.alpha_ramp) {
    const auto comma = a.alpha_ramp->find(',');
    if (comma == std::string::npos) throw std::invalid_argument("--alpha-ramp expects a1,a2");
    c.alpha.start = std::stod(a.alpha_ramp->substr(0, comma));
    c.alpha.end = std::stod(a.alpha_ramp->substr(comma + 1));
  }
  if (a.hinge) c.inter_hinge = *a.hinge;
  if (a.s_max) c.s_max = *a.s_max;
  if (a.ema) c.ema_decay = *a.ema;
  if (a.seed) c.seed = *a.seed;
  if (a.augment) c.augment = true;
  c.output_dir = ResolveOutputDir(c.output_dir);
  return c;
}

int Train(const TrainArgs& a, std::ostream& out) {
  std::vector<TrainRecord> history;
  TrainState state;
  if (!a.resume.empty()) {
    state = resume_training(a.resume, &history, a.steps);
  } else {
    state = train(BuildTrainConfig(a), &history);
  }
  out << "trained to step " << state.step;
  if (!history.empty()) {
    const auto& r = history.back();
    out << std::setprecision(6) << ": total " << r.total << ", intra " << r.intra << ", inter "
        << r.inter << ", margin " << r.margin;
  }
  out << "\n";
  if (!state.config.output_dir.empty()) {
    out << "checkpoint: " << (fs::path(state.config.output_dir) / "final.ckpt").string() << "\n";
  }
  return 0;
}

// --- eval / attack ----------------------------------------------------------

struct DataArgs {
  std::string checkpoint;
  std::string split = "test";
  std::int64_t limit = 0;
  std::uint64_t seed = 0;
  double tau = 0.1;
  std::int64_t batch_size = 64;
  std::optional<std::string> output;
  std::optional<std::string> data_path;
};

struct Loaded {
  TrainState state;
  ClassifierBundle bundle;
  Dataset data;
  LabeledImages samples;
};

Loaded LoadForEval(const DataArgs& a) {
  Loaded l;
  l.state = load_checkpoint(a.checkpoint);
  l.bundle = MakeBundle(l.state, a.tau);
  auto spec = l.state.config.data;
  if (spec.split != a.split) spec.num_samples = 0;
  spec.split = a.split;
  if (a.data_path) spec.path = *a.data_path;
  l.data = load_dataset(spec);
  l.samples = l.data.Head(a.limit);
  return l;
}

fs::path OutputFor(const DataArgs& a, const Loaded& l) {
  std::string dir = a.output ? *a.output : l.state.config.output_dir;
  if (dir.empty()) dir = fs::path(a.checkpoint).parent_path().string();
  if (dir.empty()) dir = ".";
  const fs::path p = ResolveOutputDir(dir);
  fs::create_directories(p);
  return p;
}

int Eval(const DataArgs& a, std::int64_t eot, std::ostream& out) {
  if (eot < 1) throw std::invalid_argument("--eot must be >= 1");
  auto l = LoadForEval(a);
  const auto dir = OutputFor(a, l);
  auto gen = MakeGenerator(a.seed);
  std::ofstream rec(dir / "eval_records.jsonl");
  const auto n = l.samples.images.size(0);
  std::int64_t correct = 0;
  double agreement_sum = 0.0;
  l.bundle.predictor->reset_counters();
  for (std::int64_t start = 0; start < n; start += a.batch_size) {
    const auto end = std::min(n, start + a.batch_size);
    auto xb = l.samples.images.slice(0, start, end);
    auto p = predict(l.bundle, xb, gen);
    // The reported distances come from the first draw; the class is the
    // majority over all draws, ties low.
    const auto k = l.bundle.codebook.num_classes;
    std::vector<std::vector<std::int64_t>> votes(p.classes.size(), std::vector<std::int64_t>(k, 0));
    for (std::size_t i = 0; i < p.classes.size(); ++i) ++votes[i][p.classes[i]];
    for (std::int64_t draw = 1; draw < eot; ++draw) {
      auto more = classify(l.bundle, xb, gen);
      for (std::size_t i = 0; i < more.size(); ++i) ++votes[i][more[i]];
    }
    std::vector<std::int64_t> classes(p.classes.size());
    std::vector<double> agreement(p.classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) {
      std::int64_t best = 0;
      for (std::int64_t c = 1; c < k; ++c) {
        if (votes[i][c] > votes[i][best]) best = c;
      }
      classes[i] = best;
      agreement[i] = static_cast<double>(votes[i][best]) / static_cast<double>(eot);
    }
    auto dist = p.distances.contiguous();
    for (std::size_t i = 0; i < classes.size(); ++i) {
      const auto idx = start + static_cast<std::int64_t>(i);
      const auto label = l.samples.labels[idx];
      correct += classes[i] == label;
      agreement_sum += agreement[i];
      std::vector<double> d(dist[i].data_ptr<double>(),
                            dist[i].data_ptr<double>() + dist.size(1));
      rec << Json{{"index", idx},          {"true_class", label},
                  {"prediction", classes[i]}, {"agreement", agreement[i]},
                  {"distances", d}}
                 .dump()
          << "\n";
    }
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(n);
  WriteJsonFile(dir / "eval_summary.json",
                Json{{"version", std::string(kVersionTag)},
                     {"command", "eval"},
                     {"checkpoint", a.checkpoint},
                     {"split", a.split},
                     {"n_samples", n},
                     {"seed", a.seed},
                     {"eot", eot},
                     {"tau", a.tau},
                     {"clean_accuracy", acc},
                     {"mean_agreement", agreement_sum / static_cast<double>(n)},
                     {"predictor_calls", l.bundle.predictor->calls()},
                     {"predictor_eval_count", l.bundle.predictor->evaluated_samples()},
                     {"train_config", ToJson(l.state.config)}});
  out << std::setprecision(4) << "clean accuracy " << acc << " on " << n << " " << a.split
      << " samples\n";
  return 0;
}

struct AttackArgs {
  std::string family = "pgd";
  std::string epsilon = "8/255";
  std::optional<std::int64_t> steps, eot;
  std::optional<std::string> step_size, gradient_mode;
  std::optional<double> momentum;
  std::optional<bool> random_start;
};

int Attack(const DataArgs& a, const AttackArgs& k, std::ostream& out) {
  auto cfg = AttackConfig::Defaults(ParseAttackFamily(k.family), ParseFraction(k.epsilon));
  if (k.steps) cfg.steps = *k.steps;
  if (k.eot) cfg.eot_samples = *k.eot;
  if (k.step_size) cfg.step_size = ParseFraction(*k.step_size);
  if (k.gradient_mode) cfg.gradient_mode = ParseGradientMode(*k.gradient_mode);
  if (k.momentum) cfg.momentum_decay = *k.momentum;
  if (k.random_start) cfg.random_start = *k.random_start;
  cfg.seed = a.seed;
  cfg.Validate();

  auto l = LoadForEval(a);
  const auto dir = OutputFor(a, l);
  auto gen = MakeGenerator(a.seed);
  auto report = evaluate_robustness(l.bundle, l.samples, cfg, gen, a.batch_size);
  std::ofstream rec(dir / "attack_records.jsonl");
  for (const auto& r : report.records) rec << ToJson(r).dump() << "\n";
  auto summary = ToJson(report, false);
  summary["version"] = std::string(kVersionTag);
  summary["command"] = "attack";
  summary["checkpoint"] = a.checkpoint;
  summary["split"] = a.split;
  summary["seed"] = a.seed;
  summary["tau"] = a.tau;
  summary["train_config"] = ToJson(l.state.config);
  WriteJsonFile(dir / "attack_summary.json", summary);
  out << std::setprecision(4) << ToString(cfg.family) << ": clean " << report.clean_accuracy
      << ", robust " << report.robust_accuracy << " on " << report.n_samples
      << " samples (max linf " << report.max_linf * 255.0 << "/255)\n";
  return 0;
}

// --- param-count -------------------------------------------------------------

int ParamCount(std::int64_t cm, const std::string& u, std::int64_t nr, std::int64_t res,
               std::int64_t channels, bool json, std::ostream& out) {
  PredictorConfig c;
  c.model_channels = cm;
  c.channel_multipliers = ParseIntList(u);
  c.res_blocks = nr;
  c.base_resolution = res;
  c.in_channels = c.out_channels = channels;
  c.Validate();
  const auto count = param_count(c);
  if (json) {
    out << Json{{"config", ToJson(c)}, {"param_count", count}}.dump() << "\n";
  } else {
    out << count << " (" << std::fixed << std::setprecision(2) << count / 1e6 << "M)\n";
  }
  return 0;
}

// --- report --------------------------------------------------------------------

std::string LossCurveSvg(const std::vector<Json>& log) {
  const double w = 640, h = 360, m = 40;
  double max_step = 1, lo = 0, hi = 0;
  for (const auto& r : log) {
    max_step = std::max(max_step, r["step"].get<double>());
    for (const char* k : {"total", "intra", "inter"}) {
      lo = std::min(lo, r[k].get<double>());
      hi = std::max(hi, r[k].get<double>());
    }
  }
  if (hi <= lo) hi = lo + 1;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::pair<const char*, const char*> series[] = {
      {"total", "black"}, {"intra", "#1f77b4"}, {"inter", "#d62728"}};
  int row = 0;
  for (const auto& [key, color] : series) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& r : log) {
      const double x = m + (w - 2 * m) * r["step"].get<double>() / max_step;
      const double y = h - m - (h - 2 * m) * (r[key].get<double>() - lo) / (hi - lo);
      svg << x << "," << y << " ";
    }
    svg << "\"/>\n<text x=\"" << w - 120 << "\" y=\"" << 20 + 16 * row++ << "\" fill=\"" << color
        << "\">" << key << "</text>\n";
  }
  svg << "<text x=\"" << m << "\" y=\"" << h - 10 << "\">step 0.." << max_step << ", loss "
      << lo << ".." << hi << "</text>\n</svg>\n";
  return svg.str();
}

struct ReportArgs {
  std::string run = "train_run";
  std::string checkpoint;
  bool grid = false;
  bool plot = false;
  std::int64_t grid_count = 8;
  std::string split = "test";
  std::uint64_t seed = 0;
};

int Report(const ReportArgs& a, std::ostream& out) {
  const fs::path dir = ResolveOutputDir(a.run);
  if (!fs::is_directory(dir)) throw std::runtime_error("run directory " + dir.string() + " not found");
  Json report{{"version", std::string(kVersionTag)}, {"run", dir.string()}};
  std::ostringstream md;
  md << "# Run report: " << dir.string() << "\n\n";

  if (fs::exists(dir / "config.json")) report["train"] = ReadJsonFile(dir / "config.json");
  const auto log = ReadJsonLines(dir / "train_log.jsonl");
  if (!log.empty()) {
    const auto& last = log.back();
    report["final_train_record"] = last;
    md << "| step | alpha | total | intra | inter | margin |\n|---|---|---|---|---|---|\n";
    const std::size_t stride = std::max<std::size_t>(1, log.size() / 10);
    for (std::size_t i = 0; i < log.size(); ++i) {
      if (i % stride != 0 && i + 1 != log.size()) continue;
      const auto& r = log[i];
      md << "| " << r["step"] << " | " << r["alpha"] << " | " << r["total"] << " | "
         << r["intra"] << " | " << r["inter"] << " | " << r["margin"] << " |\n";
    }
    md << "\n";
    if (a.plot) {
      std::ofstream(dir / "loss_curve.svg") << LossCurveSvg(log);
      report["plot"] = (dir / "loss_curve.svg").string();
    }
  }
  for (const char* name : {"eval_summary.json", "attack_summary.json"}) {
    if (!fs::exists(dir / name)) continue;
    auto s = ReadJsonFile(dir / name);
    s.erase("train_config");
    report[std::string(name).substr(0, std::string(name).find('.'))] = s;
    md << "| " << name << " | value |\n|---|---|\n";
    for (const auto& [key, value] : s.items()) {
      if (!value.is_structured()) md << "| " << key << " | " << value << " |\n";
    }
    md << "\n";
  }

  if (a.grid) {
    const std::string ckpt =
        a.checkpoint.empty() ? (dir / "final.ckpt").string() : a.checkpoint;
    auto state = load_checkpoint(ckpt);
    auto bundle = MakeBundle(state);
    auto spec = state.config.data;
    if (spec.split != a.split) spec.num_samples = 0;
    spec.split = a.split;
    auto data = load_dataset(spec);
    auto head = data.Head(a.grid_count);
    auto gen = MakeGenerator(a.seed);
    auto pred = predict(bundle, head.images, gen);
    auto idx = torch::tensor(head.labels, torch::TensorOptions().dtype(torch::kInt64));
    auto labels = bundle.codebook.labels.index_select(0, idx);
    const auto path = (dir / "grid.ppm").string();
    WritePpm(MakeImageGrid({head.images, labels, pred.y0_hat}, bundle.codebook.data_range), path);
    report["grid"] = {{"path", path},
                      {"rows", {"inputs", "image labels", "generated y0"}},
                      {"true_classes", head.labels},
                      {"predicted_classes", pred.classes},
                      {"seed", a.seed}};
    md << "Image grid (rows: inputs, image labels, generated y0): " << path << "\n";
  }
  WriteJsonFile(dir / "report.json", report);
  std::ofstream(dir / "report.md") << md.str();
  out << md.str();
  return 0;
}

}  // namespace

std::string ResolveOutputDir(const std::string& dir) {
  const char* root = std::getenv(kOutputRootEnv);
  if (dir.empty() || root == nullptr || *root == '\0' || fs::path(dir).is_absolute()) return dir;
  // Already under the root (e.g. a checkpoint's stored output directory).
  const std::string prefix = fs::path(root).string();
  if (dir.rfind(prefix, 0) == 0) return dir;
  return (fs::path(root) / dir).string();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Image-to-image diffusion classifier", "idc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersionTag));

  GenLabelsArgs gl;
  auto* gen_cmd = app.add_subcommand("gen-labels", "Generate an orthogonal label codebook");
  gen_cmd->add_option("--classes", gl.classes, "Number of classes")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--shape", gl.shape, "Label shape CxHxW");
  gen_cmd->add_option("--range", gl.range, "Data range lo,hi");
  gen_cmd->add_option("--seed", gl.seed, "Random seed");
  gen_cmd->add_option("--output", gl.output, "Output directory");
  gen_cmd->add_flag("--grid", gl.grid, "Also write the labels as a PPM grid");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a predictor");
  train_cmd->add_option("--config", ta.config_file, "JSON config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--resume", ta.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_option("--output", ta.output, "Output directory");
  train_cmd->add_option("--dataset", ta.dataset, "shapes-K, cifar10 or cifar100");
  train_cmd->add_option("--data-path", ta.data_path, "Dataset directory");
  train_cmd->add_option("--subset", ta.subset, "Class subset, e.g. 0,1");
  train_cmd->add_option("--resolution", ta.resolution, "Image size");
  train_cmd->add_option("--num-samples", ta.num_samples, "Synthetic sample count");
  train_cmd->add_option("--batch-size", ta.batch_size, "Batch size");
  train_cmd->add_option("--steps", ta.steps, "Optimizer steps");
  train_cmd->add_option("--lr", ta.lr, "Learning rate");
  train_cmd->add_option("--alpha", ta.alpha, "Constant inter-class weight");
  train_cmd->add_option("--alpha-ramp", ta.alpha_ramp, "Linear ramp a1,a2");
  train_cmd->add_option("--inter-hinge", ta.hinge, "Clamp for the inter-class distance");
  train_cmd->add_option("--ts", ta.ts, "Diffusion steps");
  train_cmd->add_option("--smax", ta.s_max, "Variance scale");
  train_cmd->add_option("--cm", ta.cm, "Model channels");
  train_cmd->add_option("--u", ta.u, "Channel multipliers, e.g. 1,4");
  train_cmd->add_option("--nr", ta.nr, "Residual blocks per level");
  train_cmd->add_option("--seed", ta.seed, "Random seed");
  train_cmd->add_option("--ema", ta.ema, "EMA decay");
  train_cmd->add_flag("--augment", ta.augment, "Random horizontal flips");
  train_cmd->add_option("--checkpoint-every", ta.checkpoint_every, "Checkpoint cadence");
  train_cmd->add_option("--log-every", ta.log_every, "Log cadence");

  auto add_data = [](CLI::App* cmd, DataArgs& d) {
    cmd->add_option("--checkpoint", d.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--split", d.split, "train or test");
    cmd->add_option("--limit", d.limit, "Use the first N samples (0: all)");
    cmd->add_option("--seed", d.seed, "Sampling seed");
    cmd->add_option("--tau", d.tau, "Soft-logit temperature");
    cmd->add_option("--batch-size", d.batch_size, "Evaluation batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--output", d.output, "Output directory");
    cmd->add_option("--data-path", d.data_path, "Dataset directory override");
  };
  DataArgs ea;
  std::int64_t eot = 1;
  auto* eval_cmd = app.add_subcommand("eval", "Clean accuracy");
  add_data(eval_cmd, ea);
  eval_cmd->add_option("--eot", eot, "Majority vote over N draws");

  DataArgs aa;
  AttackArgs ka;
  auto* attack_cmd = app.add_subcommand("attack", "Robust accuracy under an attack");
  add_data(attack_cmd, aa);
  attack_cmd->add_option("--family", ka.family, "fgsm, pgd, mifgsm, cw_margin, pgd_eot, bpda_eot");
  attack_cmd->add_option("--epsilon", ka.epsilon, "L-inf budget in pixel units, e.g. 8/255");
  attack_cmd->add_option("--steps", ka.steps, "Iterations");
  attack_cmd->add_option("--step-size", ka.step_size, "Per-step size, e.g. 2/255");
  attack_cmd->add_option("--eot", ka.eot, "Gradient draws per step");
  attack_cmd->add_option("--gradient-mode", ka.gradient_mode, "exact or bpda");
  attack_cmd->add_option("--momentum", ka.momentum, "MI-FGSM decay");
  attack_cmd->add_option("--random-start", ka.random_start, "true or false");

  std::int64_t cm = 64, nr = 1, res = 32, channels = 3;
  std::string u = "1,4";
  bool pc_json = false;
  auto* pc_cmd = app.add_subcommand("param-count", "Count predictor parameters");
  pc_cmd->add_option("--cm", cm, "Model channels");
  pc_cmd->add_option("--u", u, "Channel multipliers");
  pc_cmd->add_option("--nr", nr, "Residual blocks per level");
  pc_cmd->add_option("--res", res, "Input resolution");
  pc_cmd->add_option("--channels", channels, "Image channels");
  pc_cmd->add_flag("--json", pc_json, "JSON output");

  ReportArgs ra;
  auto* report_cmd = app.add_subcommand("report", "Summarize a run directory");
  report_cmd->add_option("--run", ra.run, "Run directory");
  report_cmd->add_option("--checkpoint", ra.checkpoint, "Checkpoint for the grid");
  report_cmd->add_flag("--grid", ra.grid, "Write inputs / labels / generated rows as PPM");
  report_cmd->add_flag("--plot", ra.plot, "Write the loss curve as SVG");
  report_cmd->add_option("--grid-count", ra.grid_count, "Samples in the grid")->check(CLI::PositiveNumber);
  report_cmd->add_option("--split", ra.split, "Split for the grid");
  report_cmd->add_option("--seed", ra.seed, "Sampling seed for the grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersionTag << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (*gen_cmd) return GenLabels(gl, out);
    if (*train_cmd) return Train(ta, out);
    if (*eval_cmd) return Eval(ea, eot, out);
    if (*attack_cmd) return Attack(aa, ka, out);
    if (*pc_cmd) return ParamCount(cm, u, nr, res, channels, pc_json, out);
    if (*report_cmd) return Report(ra, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(argc, argv, std::cout, std::cerr);
}

}  // namespace idc
