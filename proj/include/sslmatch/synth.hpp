#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sslmatch/common.hpp"
#include "sslmatch/data.hpp"
#include "sslmatch/image.hpp"

namespace sslmatch {

/// Procedural OCT-like B-scans: a curved retinal band on a speckled
/// background. Class cues for C = 4 follow the OCT classes: NORMAL has a
/// smooth band, DRUSEN bumps lift the lower boundary, CNV adds a bright
/// lesion under the band and DME punches dark cysts into it. With more than
/// four classes the extra ones combine cues.
struct SynthSpec {
  int classes = 4;
  int train_per_class = 510;
  int val_per_class = 8;
  int test_per_class = 50;
  int image_side = 32;
  std::uint64_t seed = 0;
  double noise = 0.25;  // multiplicative speckle strength

  void validate() const;
};

std::vector<std::string> synth_class_names(int classes);

/// One monochrome image, quantized to multiples of 1/255 so that it survives
/// a PNG round trip unchanged.
Image synth_image(int label, const SynthSpec& spec, Rng& rng);

/// In-memory dataset with the same content `write_synthetic_dataset` puts on
/// disk. All train images land in train_labeled.
DatasetSplits make_synthetic_splits(const SynthSpec& spec, bool three_channel = true);

/// Writes `<out>/{train,val,test}/<class>/<index>.png`.
void write_synthetic_dataset(const std::filesystem::path& out, const SynthSpec& spec);

/// Disjoint texture task (stripes, checkers, rings, blobs) used to pretrain
/// the transfer baseline at desk scale.
DatasetSplits make_auxiliary_splits(int per_class, int image_side, std::uint64_t seed);

}  // namespace sslmatch
