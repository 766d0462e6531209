#include "sslmatch/data.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "sslmatch/common.hpp"

namespace fs = std::filesystem;

namespace sslmatch {
namespace {

bool has_image_extension(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

bool decode_monochrome(const fs::path& file, const LoadOptions& options, Image& out) {
  cv::Mat raw = cv::imread(file.string(), cv::IMREAD_GRAYSCALE);
  if (raw.empty()) return false;
  if (options.image_side > 0 && (raw.rows != options.image_side || raw.cols != options.image_side)) {
    cv::Mat resized;
    cv::resize(raw, resized, cv::Size(options.image_side, options.image_side), 0, 0,
               cv::INTER_AREA);
    raw = resized;
  }
  Image img(raw.rows, raw.cols, 1);
  for (int y = 0; y < raw.rows; ++y) {
    const auto* row = raw.ptr<std::uint8_t>(y);
    for (int x = 0; x < raw.cols; ++x) img.at(0, y, x) = static_cast<float>(row[x]) / 255.0f;
  }
  out = options.three_channel ? to_three_channel(img) : std::move(img);
  return true;
}

std::vector<LabeledExample> load_split(const fs::path& split_dir, const std::string& split_name,
                                       const std::vector<std::string>& class_names,
                                       const LoadOptions& options, DatasetSplits& splits) {
  std::vector<LabeledExample> examples;
  const bool required = split_name == "train";
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const fs::path class_dir = split_dir / class_names[c];
    if (!fs::is_directory(class_dir)) {
      if (required) throw Error("missing class folder '" + class_names[c] + "' in " + split_dir.string());
      splits.warnings.push_back(split_name + ": no folder for class '" + class_names[c] + "'");
      continue;
    }
    const auto files = list_images(class_dir);
    if (files.empty()) {
      if (required) throw Error("empty class folder '" + class_names[c] + "' in " + split_dir.string());
      splits.warnings.push_back(split_name + ": class '" + class_names[c] + "' has no images");
      continue;
    }
    for (const auto& file : files) {
      LabeledExample ex;
      if (!decode_monochrome(file, options, ex.image)) {
        ++splits.skipped_images;
        splits.warnings.push_back("unreadable image skipped: " + file.string());
        continue;
      }
      ex.label = static_cast<int>(c);
      ex.source_index = examples.size();
      examples.push_back(std::move(ex));
    }
  }
  if (!required && examples.empty()) splits.warnings.push_back(split_name + " split is empty");
  return examples;
}

}  // namespace

DatasetSplits load_image_folder(const fs::path& root, std::vector<std::string> class_names,
                                const LoadOptions& options) {
  for (const char* split : {"train", "val", "test"}) {
    if (!fs::is_directory(root / split)) {
      throw Error("missing split directory: " + (root / split).string());
    }
  }
  if (class_names.empty()) {
    for (const auto& entry : fs::directory_iterator(root / "train")) {
      if (entry.is_directory()) class_names.push_back(entry.path().filename().string());
    }
    std::sort(class_names.begin(), class_names.end());
    if (class_names.empty()) throw Error("no class folders under " + (root / "train").string());
  }

  DatasetSplits splits;
  splits.class_names = class_names;
  splits.train_labeled = load_split(root / "train", "train", class_names, options, splits);
  splits.validation = load_split(root / "val", "val", class_names, options, splits);
  splits.test = load_split(root / "test", "test", class_names, options, splits);
  for (const auto& w : splits.warnings) std::cerr << "warning: " << w << '\n';
  return splits;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  auto rng = make_rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

LabeledSubset sample_labeled_subset(const std::vector<LabeledExample>& train, int n_labeled,
                                    int num_classes, std::uint64_t seed) {
  if (num_classes < 1) throw Error("sample_labeled_subset: need at least one class");
  if (n_labeled < 0 || n_labeled % num_classes != 0) {
    throw ConfigError("n_labeled=" + std::to_string(n_labeled) + " is not divisible by class count " +
                      std::to_string(num_classes));
  }
  const auto per_class = static_cast<std::size_t>(n_labeled / num_classes);

  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int label = train[i].label;
    if (label < 0 || label >= num_classes) throw Error("label out of range in train split");
    by_class[label].push_back(i);
  }

  std::vector<bool> chosen(train.size(), false);
  for (int c = 0; c < num_classes; ++c) {
    const auto& pool = by_class[c];
    if (pool.size() < per_class) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                        " training images, fewer than the " + std::to_string(per_class) +
                        " labeled examples requested");
    }
    const auto perm = seeded_permutation(pool.size(), derive_seed(seed, 0x6c61626cULL, c));
    for (std::size_t k = 0; k < per_class; ++k) chosen[pool[perm[k]]] = true;
  }

  LabeledSubset subset;
  subset.labeled.reserve(static_cast<std::size_t>(n_labeled));
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (chosen[i]) {
      subset.labeled.push_back(train[i]);
    } else {
      subset.unlabeled.push_back(UnlabeledExample{train[i].image, train[i].source_index});
    }
  }
  return subset;
}

void apply_labeled_subset(DatasetSplits& splits, int n_labeled, std::uint64_t seed) {
  auto subset = sample_labeled_subset(splits.train_labeled, n_labeled, splits.num_classes(), seed);
  splits.train_labeled = std::move(subset.labeled);
  splits.train_unlabeled = std::move(subset.unlabeled);
}

BatchIterator::BatchIterator(std::size_t labeled_count, std::size_t unlabeled_count, BatchPlan plan)
    : labeled_count_(labeled_count), unlabeled_count_(unlabeled_count), plan_(plan) {
  if (plan_.labeled_batch_size < 1) throw ConfigError("labeled batch size must be >= 1");
  if (plan_.unlabeled_ratio < 1) throw ConfigError("unlabeled ratio mu must be >= 1");
  if (labeled_count_ < static_cast<std::size_t>(plan_.labeled_batch_size)) {
    throw ConfigError("labeled pool (" + std::to_string(labeled_count_) +
                      ") is smaller than the batch size " +
                      std::to_string(plan_.labeled_batch_size));
  }
  batches_per_epoch_ = labeled_count_ / static_cast<std::size_t>(plan_.labeled_batch_size);
}

std::size_t BatchIterator::unlabeled_batch_size() const {
  if (unlabeled_count_ == 0) return 0;
  return static_cast<std::size_t>(plan_.labeled_batch_size) *
         static_cast<std::size_t>(plan_.unlabeled_ratio);
}

const std::vector<std::size_t>& BatchIterator::labeled_order(std::size_t epoch) {
  if (cached_epoch_ != epoch) {
    labeled_perm_ = seeded_permutation(labeled_count_, derive_seed(plan_.shuffle_seed, 0x4cULL, epoch));
    cached_epoch_ = epoch;
  }
  return labeled_perm_;
}

const std::vector<std::size_t>& BatchIterator::unlabeled_order(std::size_t pass) {
  if (cached_pass_ != pass) {
    unlabeled_perm_ =
        seeded_permutation(unlabeled_count_, derive_seed(plan_.shuffle_seed, 0x55ULL, pass));
    cached_pass_ = pass;
  }
  return unlabeled_perm_;
}

BatchIndices BatchIterator::batch(std::size_t epoch, std::size_t index) {
  if (index >= batches_per_epoch_) throw Error("batch index past the end of the epoch");
  const auto b = static_cast<std::size_t>(plan_.labeled_batch_size);
  BatchIndices out;
  const auto& order = labeled_order(epoch);
  out.labeled.assign(order.begin() + static_cast<std::ptrdiff_t>(index * b),
                     order.begin() + static_cast<std::ptrdiff_t>((index + 1) * b));

  const auto ub = unlabeled_batch_size();
  if (ub > 0) {
    const std::size_t start = (epoch * batches_per_epoch_ + index) * ub;
    out.unlabeled.reserve(ub);
    for (std::size_t j = 0; j < ub; ++j) {
      const std::size_t pos = start + j;
      out.unlabeled.push_back(unlabeled_order(pos / unlabeled_count_)[pos % unlabeled_count_]);
    }
  }
  return out;
}

std::vector<BatchIndices> BatchIterator::epoch(std::size_t epoch) {
  std::vector<BatchIndices> out;
  out.reserve(batches_per_epoch_);
  for (std::size_t i = 0; i < batches_per_epoch_; ++i) out.push_back(batch(epoch, i));
  return out;
}

}  // namespace sslmatch
