#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sslmatch/common.hpp"

namespace sslmatch {

struct ParamSegment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  bool trainable = true;

  friend bool operator==(const ParamSegment&, const ParamSegment&) = default;
};

/// Flat parameter storage with a named-segment layout. Segments tile the
/// value array in order; the trainable flag drives freezing.
class ParamVector {
 public:
  ParamVector() = default;

  /// Appends a zero-initialized segment and returns its offset.
  std::size_t add_segment(std::string name, std::size_t length, bool trainable = true);

  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] const std::vector<ParamSegment>& segments() const { return segments_; }

  [[nodiscard]] const ParamSegment& segment_info(std::string_view name) const;
  [[nodiscard]] std::span<double> segment(std::string_view name);
  [[nodiscard]] std::span<const double> segment(std::string_view name) const;

  void set_trainable(std::string_view name, bool trainable);
  void set_all_trainable(bool trainable);
  [[nodiscard]] std::size_t trainable_segment_count() const;

  /// Same segment names, offsets and lengths (trainable flags ignored).
  [[nodiscard]] bool same_layout(const ParamVector& other) const;

  /// Copy with identical layout and every value zero.
  [[nodiscard]] ParamVector zeros_like() const;
  void fill(double value);

  [[nodiscard]] bool all_finite() const;

  /// Replaces values keeping the layout; sizes must match.
  void assign_values(std::span<const double> values);

  /// Rebuilds from serialized parts; validates that segments tile the values.
  static ParamVector from_parts(std::vector<ParamSegment> segments, std::vector<double> values);

 private:
  std::vector<double> values_;
  std::vector<ParamSegment> segments_;
};

double l2_distance(std::span<const double> a, std::span<const double> b);

}  // namespace sslmatch
