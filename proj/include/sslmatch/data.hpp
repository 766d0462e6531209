#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sslmatch/image.hpp"

namespace sslmatch {

struct LabeledExample {
  Image image;
  int label = 0;
  std::size_t source_index = 0;  // position in the train split it came from
};

struct UnlabeledExample {
  Image image;
  std::size_t source_index = 0;
};

struct DatasetSplits {
  std::vector<LabeledExample> train_labeled;
  std::vector<UnlabeledExample> train_unlabeled;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
  std::vector<std::string> class_names;

  // Populated by the loader.
  std::size_t skipped_images = 0;
  std::vector<std::string> warnings;

  [[nodiscard]] int num_classes() const { return static_cast<int>(class_names.size()); }
};

struct LoadOptions {
  int image_side = 32;  // resize target; 0 keeps the decoded size
  bool three_channel = true;
};

/// Reads `<root>/{train,val,test}/<class>/*.{png,jpg,jpeg,bmp}`. Every split
/// directory must exist. Train class folders must be non-empty; empty or
/// missing validation/test class folders only add a warning. When
/// `class_names` is empty the classes are the sorted train subdirectories.
/// Everything lands in `train_labeled`; call `sample_labeled_subset` to split.
DatasetSplits load_image_folder(const std::filesystem::path& root,
                                std::vector<std::string> class_names,
                                const LoadOptions& options = {});

struct LabeledSubset {
  std::vector<LabeledExample> labeled;
  std::vector<UnlabeledExample> unlabeled;
};

/// Balanced draw of n_labeled / C examples per class without replacement.
/// Every remaining training image goes to the unlabeled pool with its label
/// stripped.
LabeledSubset sample_labeled_subset(const std::vector<LabeledExample>& train, int n_labeled,
                                    int num_classes, std::uint64_t seed);

/// Convenience: replaces splits.train_labeled / train_unlabeled in place.
void apply_labeled_subset(DatasetSplits& splits, int n_labeled, std::uint64_t seed);

struct BatchPlan {
  int labeled_batch_size = 16;  // B
  int unlabeled_ratio = 1;      // mu
  std::uint64_t shuffle_seed = 0;
};

struct BatchIndices {
  std::vector<std::size_t> labeled;    // indices into the labeled pool
  std::vector<std::size_t> unlabeled;  // indices into the unlabeled pool
};

/// Epoch-addressable batch stream. The labeled pool is reshuffled every epoch;
/// the unlabeled pool is consumed cyclically, reshuffled once per full pass,
/// so that every unlabeled image is visited. Batches are a pure function of
/// (plan, epoch, batch index).
class BatchIterator {
 public:
  BatchIterator(std::size_t labeled_count, std::size_t unlabeled_count, BatchPlan plan);

  [[nodiscard]] std::size_t batches_per_epoch() const { return batches_per_epoch_; }
  [[nodiscard]] std::size_t unlabeled_batch_size() const;
  [[nodiscard]] const BatchPlan& plan() const { return plan_; }

  BatchIndices batch(std::size_t epoch, std::size_t index);
  std::vector<BatchIndices> epoch(std::size_t epoch);

 private:
  const std::vector<std::size_t>& labeled_order(std::size_t epoch);
  const std::vector<std::size_t>& unlabeled_order(std::size_t pass);

  std::size_t labeled_count_;
  std::size_t unlabeled_count_;
  BatchPlan plan_;
  std::size_t batches_per_epoch_;

  std::size_t cached_epoch_ = static_cast<std::size_t>(-1);
  std::vector<std::size_t> labeled_perm_;
  std::size_t cached_pass_ = static_cast<std::size_t>(-1);
  std::vector<std::size_t> unlabeled_perm_;
};

/// Uniform random permutation of [0, n) under seed.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace sslmatch
