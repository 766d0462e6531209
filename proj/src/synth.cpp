#include "sslmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace sslmatch {
namespace {

constexpr std::uint64_t kTrainSalt = 1;
constexpr std::uint64_t kValSalt = 2;
constexpr std::uint64_t kTestSalt = 3;
constexpr std::uint64_t kAuxSalt = 0x617578;

double gauss(Rng& rng) {
  // Box-Muller on raw bits, stable across standard libraries.
  const double u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double bump(double d2, double sigma) { return std::exp(-d2 / (2.0 * sigma * sigma)); }

void quantize(Image& img) {
  for (float& v : img.pixels) {
    const double q = std::round(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0);
    v = static_cast<float>(q / 255.0);
  }
}

struct Lesion {
  double x = 0.0;
  double y = 0.0;
  double size = 0.0;
};

bool has_cue(int label, int cue) {
  if (label <= 0) return false;
  if (label <= 3) return label == cue;
  // Extra classes: bit pattern over the three cues.
  return ((label - 3) >> (cue - 1)) & 1;
}

std::vector<LabeledExample> make_split(const SynthSpec& spec, int per_class, std::uint64_t salt,
                                       bool three_channel) {
  std::vector<LabeledExample> out;
  out.reserve(static_cast<std::size_t>(per_class) * spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      auto rng = make_rng(derive_seed(spec.seed, salt, static_cast<std::uint64_t>(c) << 32 | i));
      LabeledExample ex;
      ex.image = synth_image(c, spec, rng);
      if (three_channel) ex.image = to_three_channel(ex.image);
      ex.label = c;
      ex.source_index = out.size();
      out.push_back(std::move(ex));
    }
  }
  return out;
}

void write_split(const std::filesystem::path& dir, const std::vector<std::string>& names,
                 const std::vector<LabeledExample>& split) {
  namespace fs = std::filesystem;
  for (const auto& name : names) fs::create_directories(dir / name);
  std::vector<int> counters(names.size(), 0);
  for (const auto& ex : split) {
    const Image& img = ex.image;
    cv::Mat mat(img.height, img.width, CV_8UC1);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        mat.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(img.at(0, y, x) * 255.0f));
      }
    }
    char file[32];
    std::snprintf(file, sizeof(file), "%05d.png", counters[ex.label]++);
    const auto path = dir / names[ex.label] / file;
    if (!cv::imwrite(path.string(), mat)) throw Error("cannot write " + path.string());
  }
}

Image aux_image(int label, int side, Rng& rng) {
  Image img(side, side, 1);
  const double freq = uniform(rng, 0.25, 0.6);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double cx = uniform(rng, 0.3, 0.7) * side;
  const double cy = uniform(rng, 0.3, 0.7) * side;
  const double gain = uniform(rng, 0.3, 0.5);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      double v = 0.0;
      switch (label) {
        case 0: v = std::sin(freq * y + phase); break;
        case 1: v = std::sin(freq * x + phase); break;
        case 2: v = std::sin(freq * x + phase) * std::sin(freq * y + phase); break;
        default: v = std::sin(freq * std::hypot(x - cx, y - cy) + phase); break;
      }
      img.at(0, y, x) = static_cast<float>(0.5 + gain * v + 0.05 * gauss(rng));
    }
  }
  quantize(img);
  return img;
}

}  // namespace

void SynthSpec::validate() const {
  if (classes < 1) throw ConfigError("synth: classes must be >= 1");
  if (train_per_class < 0 || val_per_class < 0 || test_per_class < 0) {
    throw ConfigError("synth: per-class counts must be >= 0");
  }
  if (image_side < 8) throw ConfigError("synth: image side must be >= 8");
  if (!(noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
}

std::vector<std::string> synth_class_names(int classes) {
  static const char* kOct[] = {"NORMAL", "DRUSEN", "CNV", "DME"};
  std::vector<std::string> names;
  for (int c = 0; c < classes; ++c) {
    names.push_back(c < 4 ? kOct[c] : "CLASS" + std::to_string(c));
  }
  return names;
}

Image synth_image(int label, const SynthSpec& spec, Rng& rng) {
  const int side = spec.image_side;
  const double s = side;
  Image img(side, side, 1);

  const double background = uniform(rng, 0.04, 0.15);
  const double gain = uniform(rng, 0.55, 0.95);
  const double center = uniform(rng, 0.4, 0.62) * s;
  const double tilt = uniform(rng, -0.2, 0.2);
  const double curve = uniform(rng, -0.6, 0.6) / s;
  const double thickness = uniform(rng, 0.2, 0.3) * s;
  const double line = 0.9;  // boundary line width in pixels

  std::vector<Lesion> drusen, cnv, cysts;
  if (has_cue(label, 1)) {
    const int n = static_cast<int>(uniform_int(rng, 2, 3));
    for (int i = 0; i < n; ++i) drusen.push_back({uniform(rng, 0.15, 0.85) * s, 0.0, uniform(rng, 0.08, 0.13) * s});
  }
  if (has_cue(label, 2)) {
    cnv.push_back({uniform(rng, 0.25, 0.75) * s, 0.0, uniform(rng, 0.07, 0.1) * s});
  }
  if (has_cue(label, 3)) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    for (int i = 0; i < n; ++i) {
      cysts.push_back({uniform(rng, 0.2, 0.8) * s, uniform(rng, 0.3, 0.7), uniform(rng, 0.05, 0.08) * s});
    }
  }

  for (int x = 0; x < side; ++x) {
    const double dx = x - 0.5 * s;
    const double mid = center + tilt * dx + curve * dx * dx;
    const double top = mid - 0.5 * thickness;
    double bottom = mid + 0.5 * thickness;
    for (const auto& d : drusen) bottom -= d.size * bump((x - d.x) * (x - d.x), 0.5 * d.size + 0.5);
    for (int y = 0; y < side; ++y) {
      double v = background;
      if (y > top && y < bottom) v += 0.3 * gain;
      v += gain * 0.7 * bump((y - top) * (y - top), line);
      v += gain * bump((y - bottom) * (y - bottom), line);
      for (const auto& c : cnv) {
        const double cy = mid + 0.5 * thickness + 0.6 * c.size;
        v += gain * 0.9 * bump((x - c.x) * (x - c.x) + (y - cy) * (y - cy), c.size);
      }
      for (const auto& c : cysts) {
        const double cy = top + c.y * (bottom - top);
        const double w = bump((x - c.x) * (x - c.x) + (y - cy) * (y - cy), c.size);
        v = v * (1.0 - 0.85 * w) + background * 0.85 * w;
      }
      v *= 1.0 + spec.noise * gauss(rng);
      img.at(0, y, x) = static_cast<float>(v + 0.02 * gauss(rng));
    }
  }
  quantize(img);
  return img;
}

DatasetSplits make_synthetic_splits(const SynthSpec& spec, bool three_channel) {
  spec.validate();
  DatasetSplits splits;
  splits.class_names = synth_class_names(spec.classes);
  splits.train_labeled = make_split(spec, spec.train_per_class, kTrainSalt, three_channel);
  splits.validation = make_split(spec, spec.val_per_class, kValSalt, three_channel);
  splits.test = make_split(spec, spec.test_per_class, kTestSalt, three_channel);
  return splits;
}

void write_synthetic_dataset(const std::filesystem::path& out, const SynthSpec& spec) {
  const auto splits = make_synthetic_splits(spec, false);
  try {
    write_split(out / "train", splits.class_names, splits.train_labeled);
    write_split(out / "val", splits.class_names, splits.validation);
    write_split(out / "test", splits.class_names, splits.test);
  } catch (const std::filesystem::filesystem_error& e) {
    throw Error(std::string("cannot write synthetic dataset: ") + e.what());
  }
}

DatasetSplits make_auxiliary_splits(int per_class, int image_side, std::uint64_t seed) {
  if (per_class < 1) throw ConfigError("auxiliary task needs at least one image per class");
  DatasetSplits splits;
  splits.class_names = {"stripes_h", "stripes_v", "checker", "rings"};
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < per_class; ++i) {
      auto rng = make_rng(derive_seed(seed, kAuxSalt, static_cast<std::uint64_t>(c) << 32 | i));
      LabeledExample ex;
      ex.image = to_three_channel(aux_image(c, image_side, rng));
      ex.label = c;
      ex.source_index = splits.train_labeled.size();
      splits.train_labeled.push_back(std::move(ex));
    }
  }
  return splits;
}

}  // namespace sslmatch
