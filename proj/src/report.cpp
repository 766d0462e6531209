#include "sslmatch/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace sslmatch {
namespace {

const std::vector<std::string>& method_order() {
  static const std::vector<std::string> order = {"transfer", "supervised", "mixmatch", "fixmatch"};
  return order;
}

void sort_methods(std::vector<std::string>& methods) {
  const auto& order = method_order();
  std::sort(methods.begin(), methods.end(), [&](const std::string& a, const std::string& b) {
    const auto ia = std::find(order.begin(), order.end(), a) - order.begin();
    const auto ib = std::find(order.begin(), order.end(), b) - order.begin();
    return ia != ib ? ia < ib : a < b;
  });
}

template <typename T>
void add_unique(std::vector<T>& v, const T& x) {
  if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
}

void merge(ReportCell& cell, const StoredRun& run) {
  const double acc = *run.test_accuracy;
  if (cell.runs == 0 || acc > cell.test_accuracy) {
    cell.test_accuracy = acc;
    cell.run_hash = run.hash;
    cell.run_dir = run.dir;
    cell.wall_seconds = run.total_wall_seconds;
  }
  ++cell.runs;
}

bool completed(const StoredRun& run) { return run.status == "done" && run.test_accuracy.has_value(); }

std::string pct(double fraction) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
  return buf;
}

std::string label_n(int n_l) { return n_l == 0 ? "all" : std::to_string(n_l); }

std::string beta_label(double beta) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%g", beta);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i > 0) out += " | ";
      out += pad(rows[r][i], width[i], i == 0);
    }
    out += "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i > 0 ? 3 : 0);
      out += std::string(total, '-') + "\n";
    }
  }
  return out;
}

}  // namespace

const ReportCell* AccuracyGrid::find(const std::string& method, int n_l) const {
  const auto it = cells.find({method, n_l});
  return it == cells.end() ? nullptr : &it->second;
}

const ReportCell* EmaGrid::find(const std::string& method, int n_l, double beta) const {
  const auto it = cells.find({method, n_l, beta});
  return it == cells.end() ? nullptr : &it->second;
}

AccuracyGrid build_accuracy_grid(std::span<const StoredRun> runs) {
  AccuracyGrid grid;
  for (const auto& run : runs) {
    if (!completed(run)) continue;
    const std::string method(to_string(run.config.method));
    add_unique(grid.methods, method);
    add_unique(grid.n_labeled, run.config.n_labeled);
    merge(grid.cells[{method, run.config.n_labeled}], run);
  }
  sort_methods(grid.methods);
  std::sort(grid.n_labeled.begin(), grid.n_labeled.end(), [](int a, int b) {
    // "all labels" sorts last.
    if ((a == 0) != (b == 0)) return b == 0;
    return a < b;
  });
  return grid;
}

EmaGrid build_ema_grid(std::span<const StoredRun> runs) {
  EmaGrid grid;
  for (const auto& run : runs) {
    if (!completed(run)) continue;
    const auto method = run.config.method;
    const bool ssl = method == Method::mixmatch || method == Method::fixmatch;
    const double beta = ssl ? run.config.ema_decay : 0.0;
    const std::string name(to_string(method));
    add_unique(grid.methods, name);
    add_unique(grid.n_labeled, run.config.n_labeled);
    add_unique(grid.betas, beta);
    merge(grid.cells[{name, run.config.n_labeled, beta}], run);
  }
  sort_methods(grid.methods);
  std::sort(grid.n_labeled.begin(), grid.n_labeled.end(), [](int a, int b) {
    if ((a == 0) != (b == 0)) return b == 0;
    return a < b;
  });
  std::sort(grid.betas.begin(), grid.betas.end());
  return grid;
}

std::string format_accuracy_table(const AccuracyGrid& grid) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"method \\ n_l"};
  for (int n : grid.n_labeled) header.push_back(label_n(n));
  rows.push_back(header);
  for (const auto& m : grid.methods) {
    std::vector<std::string> row = {m};
    for (int n : grid.n_labeled) {
      const auto* cell = grid.find(m, n);
      row.push_back(cell ? pct(cell->test_accuracy) : "---");
    }
    rows.push_back(row);
  }
  return render_rows(rows);
}

std::string format_accuracy_csv(const AccuracyGrid& grid) {
  std::string out = "method,n_labeled,test_acc,runs,wall_seconds,run_hash\n";
  for (const auto& m : grid.methods) {
    for (int n : grid.n_labeled) {
      const auto* cell = grid.find(m, n);
      if (!cell) continue;
      char secs[32];
      std::snprintf(secs, sizeof(secs), "%.3f", cell->wall_seconds);
      out += m + "," + label_n(n) + "," + pct(cell->test_accuracy) + "," + std::to_string(cell->runs) + "," +
             secs + "," + cell->run_hash + "\n";
    }
  }
  return out;
}

std::string format_ema_table(const EmaGrid& grid) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> top = {"n_l"};
  std::vector<std::string> sub = {"beta_EMA"};
  for (int n : grid.n_labeled) {
    for (double b : grid.betas) {
      top.push_back(label_n(n));
      sub.push_back(beta_label(b));
    }
  }
  rows.push_back(top);
  rows.push_back(sub);
  for (const auto& m : grid.methods) {
    std::vector<std::string> row = {m};
    for (int n : grid.n_labeled) {
      for (double b : grid.betas) {
        const auto* cell = grid.find(m, n, b);
        row.push_back(cell ? pct(cell->test_accuracy) : "---");
      }
    }
    rows.push_back(row);
  }
  return render_rows(rows);
}

std::string format_time_table(const AccuracyGrid& grid) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"method \\ n_l"};
  for (int n : grid.n_labeled) header.push_back(label_n(n));
  rows.push_back(header);
  for (const auto& m : grid.methods) {
    std::vector<std::string> row = {m};
    for (int n : grid.n_labeled) {
      const auto* cell = grid.find(m, n);
      row.push_back(cell ? format_duration(cell->wall_seconds) : "---");
    }
    rows.push_back(row);
  }
  return render_rows(rows);
}

std::string format_duration(double seconds) {
  if (!(seconds >= 0.0)) seconds = 0.0;
  if (seconds < 60.0) return std::to_string(static_cast<long long>(std::lround(seconds))) + "s";
  const auto minutes = static_cast<long long>(seconds / 60.0);
  const long long d = minutes / (24 * 60);
  const long long h = (minutes / 60) % 24;
  const long long m = minutes % 60;
  std::string out;
  if (d > 0) out += std::to_string(d) + "d ";
  if (d > 0 || h > 0) out += std::to_string(h) + "h ";
  out += std::to_string(m) + "m";
  return out;
}

void render_accuracy_plot(const AccuracyGrid& grid, const std::filesystem::path& png) {
  if (grid.methods.empty() || grid.n_labeled.empty()) throw Error("render_accuracy_plot: nothing to plot");
  const int width = 720;
  const int height = 460;
  const int left = 70, right = 170, top = 30, bottom = 60;
  cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Scalar black(0, 0, 0);
  const cv::Scalar grey(215, 215, 215);
  const int plot_w = width - left - right;
  const int plot_h = height - top - bottom;

  double lo = 1.0;
  for (const auto& [key, cell] : grid.cells) lo = std::min(lo, cell.test_accuracy);
  lo = std::max(0.0, std::floor(lo * 10.0) / 10.0 - 0.1);
  auto y_of = [&](double acc) { return top + static_cast<int>((1.0 - (acc - lo) / (1.0 - lo)) * plot_h); };
  auto x_of = [&](std::size_t i) {
    if (grid.n_labeled.size() == 1) return left + plot_w / 2;
    return left + static_cast<int>(i * plot_w / (grid.n_labeled.size() - 1));
  };

  for (int t = 0; t <= 5; ++t) {
    const double acc = lo + (1.0 - lo) * t / 5.0;
    const int y = y_of(acc);
    cv::line(canvas, {left, y}, {left + plot_w, y}, grey, 1);
    cv::putText(canvas, pct(acc), {8, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1, cv::LINE_AA);
  }
  for (std::size_t i = 0; i < grid.n_labeled.size(); ++i) {
    const int x = x_of(i);
    cv::line(canvas, {x, top + plot_h}, {x, top + plot_h + 5}, black, 1);
    cv::putText(canvas, label_n(grid.n_labeled[i]), {x - 10, top + plot_h + 20}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                black, 1, cv::LINE_AA);
  }
  cv::rectangle(canvas, {left, top}, {left + plot_w, top + plot_h}, black, 1);
  cv::putText(canvas, "number of labels n_l", {left + plot_w / 2 - 80, height - 15}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
              black, 1, cv::LINE_AA);
  cv::putText(canvas, "test accuracy (%)", {left, top - 10}, cv::FONT_HERSHEY_SIMPLEX, 0.5, black, 1, cv::LINE_AA);

  static const cv::Scalar palette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214},
                                       {189, 103, 148}, {75, 86, 140}};
  for (std::size_t m = 0; m < grid.methods.size(); ++m) {
    const cv::Scalar color = palette[m % std::size(palette)];
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < grid.n_labeled.size(); ++i) {
      if (const auto* cell = grid.find(grid.methods[m], grid.n_labeled[i])) {
        pts.emplace_back(x_of(i), y_of(cell->test_accuracy));
      }
    }
    for (std::size_t i = 1; i < pts.size(); ++i) cv::line(canvas, pts[i - 1], pts[i], color, 2, cv::LINE_AA);
    for (const auto& p : pts) cv::circle(canvas, p, 4, color, cv::FILLED, cv::LINE_AA);
    const int ly = top + 20 + static_cast<int>(m) * 22;
    cv::line(canvas, {left + plot_w + 15, ly}, {left + plot_w + 40, ly}, color, 2, cv::LINE_AA);
    cv::putText(canvas, grid.methods[m], {left + plot_w + 48, ly + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.5, black, 1,
                cv::LINE_AA);
  }
  if (!cv::imwrite(png.string(), canvas)) throw Error("cannot write plot " + png.string());
}

}  // namespace sslmatch
