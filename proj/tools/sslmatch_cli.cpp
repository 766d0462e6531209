// Command-line driver: train, sweep, evaluate, report, synth.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sslmatch/checkpoint.hpp"
#include "sslmatch/config.hpp"
#include "sslmatch/data.hpp"
#include "sslmatch/experiment.hpp"
#include "sslmatch/metrics.hpp"
#include "sslmatch/report.hpp"
#include "sslmatch/results_store.hpp"
#include "sslmatch/synth.hpp"

namespace fs = std::filesystem;
using namespace sslmatch;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsage = 2;

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

std::string delta_text(const FlatConfig& delta) {
  std::string out;
  for (const auto& [k, v] : delta) out += (out.empty() ? "" : ";") + k + "=" + v;
  return out;
}

// Options shared by train and sweep.
struct RunFlags {
  std::string method;
  std::string config_path;
  std::string data;
  int n_labeled = -1;
  long long seed = -1;
  std::string out;
  std::vector<std::string> overrides;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--method", f.method, "mixmatch | fixmatch | transfer | supervised");
  cmd->add_option("--config", f.config_path, "flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--data", f.data, "image-folder root with train/val/test")->required();
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--out", f.out, "runs root (default $SSLMATCH_RUNS_DIR or ./runs)");
  cmd->add_option("--set", f.overrides, "config override key=value (repeatable)");
}

TrainConfig resolve_config(const RunFlags& f) {
  TrainConfig cfg;
  if (!f.config_path.empty()) apply_flat_config(cfg, read_flat_config(f.config_path));
  if (!f.method.empty()) cfg.method = parse_method(f.method);
  if (f.n_labeled >= 0) cfg.n_labeled = f.n_labeled;
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  for (const auto& o : f.overrides) {
    const auto [k, v] = split_assignment(o);
    apply_config_key(cfg, k, v);
  }
  cfg.validate();
  return cfg;
}

DatasetSplits load_data(const std::string& root, const TrainConfig& cfg) {
  LoadOptions opts;
  opts.image_side = cfg.image_side;
  auto splits = load_image_folder(root, {}, opts);
  for (const auto& w : splits.warnings) std::cerr << "warning: " << w << "\n";
  return splits;
}

fs::path runs_root(const std::string& out) { return out.empty() ? default_runs_root() : fs::path(out); }

void write_manifest(const fs::path& dir, const std::string& command_line, const TrainConfig& cfg,
                    const std::string& hash, const std::string& started, const std::string& status) {
  nlohmann::json j;
  j["command_line"] = command_line;
  j["config"] = to_flat(cfg);
  j["config_hash"] = hash;
  j["started_at"] = started;
  j["finished_at"] = now_iso();
  j["status"] = status;
  j["artifacts"] = {{"config", (dir / "config.resolved").string()},
                    {"metrics", (dir / "metrics.csv").string()},
                    {"checkpoint", (dir / "checkpoint.bin").string()},
                    {"status", (dir / "status").string()}};
  std::ofstream(dir / "manifest.json") << j.dump(2) << "\n";
}

int cmd_train(const RunFlags& f, const std::string& sweep_name, bool force, const std::string& command_line) {
  const auto cfg = resolve_config(f);
  const auto hash = config_hash(cfg);
  const auto dir = run_directory(runs_root(f.out), sweep_name, hash);
  if (run_status(dir) == "done" && !force) {
    std::cerr << "run " << dir.string() << " already completed; pass --force to retrain\n";
    return kRuntimeFailure;
  }
  const auto splits = load_data(f.data, cfg);
  const auto started = now_iso();
  begin_run(dir, cfg);
  std::cerr << "training " << to_string(cfg.method) << " (config " << hash << ") into " << dir.string() << "\n";
  RunOptions opts;
  opts.on_epoch = [](const MetricsRecord& r) {
    std::cerr << "epoch " << r.epoch << " loss " << r.train_total << " val_loss " << r.val_loss << " val_acc "
              << r.val_acc << "\n";
  };
  TrainResult result;
  try {
    result = run_training(cfg, splits, opts);
  } catch (const ConfigError&) {
    fail_run(dir, "invalid configuration");
    throw;
  } catch (const std::exception& e) {
    fail_run(dir, e.what());
    write_manifest(dir, command_line, cfg, hash, started, "failed");
    std::cerr << "error: " << e.what() << "\ndiagnostics: " << (dir / "status").string() << "\n";
    return kRuntimeFailure;
  }
  finish_run(dir, cfg, result);
  write_manifest(dir, command_line, cfg, hash, started, result.aborted ? "failed" : "done");
  if (result.aborted) {
    std::cerr << "training aborted: " << result.diagnostic << "\ndiagnostics: " << (dir / "metrics.csv").string()
              << "\n";
    return kRuntimeFailure;
  }
  const auto& best = result.history[result.best_index];
  std::cout << "run " << dir.string() << "\nbest epoch " << best.epoch << " val_loss " << best.val_loss
            << " test_acc " << result.test_accuracy << "\n";
  return kOk;
}

struct SweepFlags {
  std::string stage = "primary";
  std::string name;
  std::string n_labeled_list;
  std::vector<std::string> axes;
  bool paper_grid = false;
  int workers = 1;
};

int cmd_sweep(const RunFlags& f, const SweepFlags& s) {
  const auto base = resolve_config(f);
  SweepGrid grid;
  grid.stage = parse_sweep_stage(s.stage);
  if (s.paper_grid) {
    grid = grid.stage == SweepStage::primary ? primary_grid(base.method) : secondary_grid(base.method);
  }
  for (const auto& a : s.axes) {
    const auto [k, v] = split_assignment(a);
    grid.axes.push_back({k, split_list(v)});
  }
  if (grid.axes.empty()) throw ConfigError("sweep needs --paper-grid or at least one --axis key=v1,v2");
  SweepOptions opts;
  opts.runs_root = runs_root(f.out);
  opts.sweep_name = s.name.empty() ? std::string(to_string(base.method)) + "-" + s.stage : s.name;
  opts.workers = s.workers;
  for (const auto& v : split_list(s.n_labeled_list)) opts.n_labeled_values.push_back(std::stoi(v));
  if (grid.stage == SweepStage::primary && opts.n_labeled_values.empty() && f.n_labeled < 0) {
    opts.n_labeled_values.push_back(200);
  }
  opts.on_run = [](const SweepRow& r) {
    std::cerr << (r.ok ? "done   " : "failed ") << r.hash << " " << delta_text(r.delta)
              << (r.ok ? "" : ": " + r.error) << "\n";
  };
  const auto splits = load_data(f.data, base);
  const auto rows = sweep(base, grid, splits, opts);
  std::cout << "rank,order,n_labeled,best_val_loss,best_epoch,test_acc,status,hash,delta\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto delta = delta_text(r.delta);
    std::cout << i + 1 << "," << r.order << "," << r.config.n_labeled << "," << r.best_val_loss << ","
              << r.best_epoch << "," << r.test_accuracy << "," << (r.ok ? "done" : "failed") << "," << r.hash
              << "," << delta << "\n";
  }
  const bool any_ok = std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
  return any_ok ? kOk : kRuntimeFailure;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data, const std::string& split, bool teacher) {
  const auto ck = load_checkpoint(checkpoint);
  TrainConfig cfg;
  if (!ck.resolved_config.empty()) apply_flat_config(cfg, parse_flat_config(ck.resolved_config));
  const auto splits = load_data(data, cfg);
  const bool use_teacher = teacher && ck.ema_params.has_value();
  const auto model = restore_backbone(ck, use_teacher);
  const auto& examples = split == "val" ? splits.validation : split == "train" ? splits.train_labeled : splits.test;
  const auto res = evaluate(*model, model->params(), examples);
  std::cout << "split " << split << " examples " << res.count << " loss " << res.loss << " accuracy "
            << res.accuracy << "\n";
  return kOk;
}

int cmd_report(const std::string& runs_dir, const std::string& format, const std::string& out) {
  const auto runs = scan_runs(runs_root(runs_dir));
  const auto grid = build_accuracy_grid(runs);
  if (grid.cells.empty()) {
    std::cerr << "no completed runs under " << runs_root(runs_dir).string() << "\n";
    return kRuntimeFailure;
  }
  std::string text;
  if (format == "table") {
    text = format_accuracy_table(grid);
  } else if (format == "csv") {
    text = format_accuracy_csv(grid);
  } else if (format == "ema") {
    text = format_ema_table(build_ema_grid(runs));
  } else if (format == "time") {
    text = format_time_table(grid);
  } else {
    const fs::path png = out.empty() ? fs::path("accuracy_vs_labels.png") : fs::path(out);
    render_accuracy_plot(grid, png);
    std::cout << "wrote " << png.string() << "\n";
    return kOk;
  }
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream os(out);
    if (!(os << text)) throw Error("cannot write " + out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised image classification with MixMatch and FixMatch"};
  app.require_subcommand(1);
  std::string command_line;
  for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

  RunFlags train_flags;
  bool force = false;
  std::string train_sweep = "train";
  auto* train = app.add_subcommand("train", "train one configuration");
  add_run_flags(train, train_flags);
  train->add_option("--n-labeled", train_flags.n_labeled, "labeled examples (balanced over classes)");
  train->add_option("--sweep-name", train_sweep, "results subdirectory");
  train->add_flag("--force", force, "retrain even if this config already completed");

  RunFlags sweep_flags;
  SweepFlags sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a hyperparameter grid");
  add_run_flags(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--stage", sweep_opts.stage, "primary | secondary")
      ->check(CLI::IsMember({"primary", "secondary"}));
  sweep_cmd->add_option("--n-labeled", sweep_opts.n_labeled_list, "comma-separated n_l values");
  sweep_cmd->add_option("--axis", sweep_opts.axes, "grid axis key=v1,v2,... (repeatable)");
  sweep_cmd->add_flag("--paper-grid", sweep_opts.paper_grid, "use the paper grid for the stage and method");
  sweep_cmd->add_option("--workers", sweep_opts.workers, "parallel runs")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--name", sweep_opts.name, "sweep name (results subdirectory)");

  std::string ck_path, eval_data, eval_split = "test";
  bool eval_teacher = false;
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a split");
  eval->add_option("--checkpoint", ck_path)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_flag("--teacher", eval_teacher, "use the EMA teacher parameters when stored");

  std::string report_runs, report_format = "table", report_out;
  auto* report = app.add_subcommand("report", "summarize completed runs");
  report->add_option("--runs", report_runs, "runs root (default $SSLMATCH_RUNS_DIR or ./runs)");
  report->add_option("--format", report_format, "table | csv | plot | ema | time")
      ->check(CLI::IsMember({"table", "csv", "plot", "ema", "time"}));
  report->add_option("--out", report_out, "output file (stdout for text formats when omitted)");

  SynthSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a procedural OCT-like image-folder dataset");
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--classes", synth_spec.classes);
  synth->add_option("--train", synth_spec.train_per_class, "train images per class");
  synth->add_option("--val", synth_spec.val_per_class, "validation images per class");
  synth->add_option("--test", synth_spec.test_per_class, "test images per class");
  synth->add_option("--side", synth_spec.image_side);
  synth->add_option("--seed", synth_spec.seed);
  synth->add_option("--noise", synth_spec.noise, "speckle strength");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(train_flags, train_sweep, force, command_line);
    if (*sweep_cmd) return cmd_sweep(sweep_flags, sweep_opts);
    if (*eval) return cmd_evaluate(ck_path, eval_data, eval_split, eval_teacher);
    if (*report) return cmd_report(report_runs, report_format, report_out);
    if (*synth) {
      write_synthetic_dataset(synth_out, synth_spec);
      std::cout << "wrote " << synth_out << "\n";
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsage;
}
