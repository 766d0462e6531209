#include "sslmatch/results_store.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "sslmatch/checkpoint.hpp"

namespace sslmatch {
namespace fs = std::filesystem;
namespace {

constexpr const char* kHeader =
    "epoch,step,train_total,train_sup,train_unsup,lambda_u,mask_rate,val_loss,val_acc,wall_seconds";

std::mutex& store_mutex() {
  static std::mutex m;
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

fs::path default_runs_root() {
  if (const char* env = std::getenv("SSLMATCH_RUNS_DIR"); env && *env) return env;
  return "runs";
}

fs::path run_directory(const fs::path& root, const std::string& sweep, const std::string& hash) {
  return root / sweep / hash;
}

std::string run_status(const fs::path& dir) {
  std::ifstream in(dir / "status");
  std::string word;
  if (!(in >> word)) return {};
  if (!word.empty() && word.back() == ':') word.pop_back();
  return word;
}

void begin_run(const fs::path& dir, const TrainConfig& cfg) {
  std::lock_guard lock(store_mutex());
  fs::create_directories(dir);
  write_text(dir / "config.resolved", format_flat_config(to_flat(cfg)));
  write_text(dir / "status", "running\n");
}

void finish_run(const fs::path& dir, const TrainConfig& cfg, const TrainResult& result) {
  std::lock_guard lock(store_mutex());
  fs::create_directories(dir);
  write_text(dir / "config.resolved", format_flat_config(to_flat(cfg)));
  write_metrics_csv(dir / "metrics.csv", result.history,
                    result.aborted ? std::nullopt : std::optional<double>(result.test_accuracy));
  if (result.aborted) {
    write_text(dir / "status", "failed: " + result.diagnostic + "\n");
    return;
  }
  save_checkpoint(dir / "checkpoint.bin", result.best);
  write_text(dir / "status", "done\n");
}

void fail_run(const fs::path& dir, const std::string& message) {
  std::lock_guard lock(store_mutex());
  fs::create_directories(dir);
  write_text(dir / "status", "failed: " + message + "\n");
}

void write_metrics_csv(const fs::path& path, std::span<const MetricsRecord> history,
                       std::optional<double> test_accuracy) {
  std::string text = std::string(kHeader) + "\n";
  for (const auto& r : history) {
    text += std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + num(r.train_total) + "," +
            num(r.train_sup) + "," + num(r.train_unsup) + "," + num(r.lambda_u) + "," + num(r.mask_rate) + "," +
            num(r.val_loss) + "," + num(r.val_acc) + "," + num(r.wall_seconds) + "\n";
  }
  if (test_accuracy) text += "test_acc," + num(*test_accuracy) + "\n";
  write_text(path, text);
}

std::vector<MetricsRecord> read_metrics_csv(const fs::path& path, std::optional<double>* test_accuracy) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw Error("unexpected metrics header in " + path.string());
  std::vector<MetricsRecord> out;
  if (test_accuracy) test_accuracy->reset();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    try {
      if (f.size() == 2 && f[0] == "test_acc") {
        if (test_accuracy) *test_accuracy = std::stod(f[1]);
        continue;
      }
      if (f.size() != 10) throw Error("bad field count");
      MetricsRecord r;
      r.epoch = std::stoll(f[0]);
      r.step = std::stoll(f[1]);
      r.train_total = std::stod(f[2]);
      r.train_sup = std::stod(f[3]);
      r.train_unsup = std::stod(f[4]);
      r.lambda_u = std::stod(f[5]);
      r.mask_rate = std::stod(f[6]);
      r.val_loss = std::stod(f[7]);
      r.val_acc = std::stod(f[8]);
      r.wall_seconds = std::stod(f[9]);
      out.push_back(r);
    } catch (const std::exception&) {
      throw Error("malformed metrics line in " + path.string() + ": " + line);
    }
  }
  return out;
}

StoredRun read_run(const fs::path& dir) {
  StoredRun run;
  run.dir = dir;
  run.hash = dir.filename().string();
  run.status = run_status(dir);
  run.config = from_flat(read_flat_config(dir / "config.resolved"));
  if (fs::exists(dir / "metrics.csv")) run.history = read_metrics_csv(dir / "metrics.csv", &run.test_accuracy);
  if (!run.history.empty()) {
    const auto best = best_epoch_index(run.history);
    run.best_val_loss = run.history[best].val_loss;
    run.best_epoch = run.history[best].epoch;
  }
  for (const auto& r : run.history) run.total_wall_seconds += r.wall_seconds;
  return run;
}

std::vector<StoredRun> scan_runs(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (!fs::is_directory(root)) return {};
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "status" &&
        fs::exists(entry.path().parent_path() / "config.resolved")) {
      dirs.push_back(entry.path().parent_path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<StoredRun> out;
  for (const auto& d : dirs) out.push_back(read_run(d));
  return out;
}

}  // namespace sslmatch
