#include "sslmatch/params.hpp"

#include <algorithm>
#include <cmath>

#include "sslmatch/common.hpp"

namespace sslmatch {

std::size_t ParamVector::add_segment(std::string name, std::size_t length, bool trainable) {
  for (const auto& s : segments_) {
    if (s.name == name) throw Error("duplicate parameter segment '" + name + "'");
  }
  const std::size_t offset = values_.size();
  segments_.push_back(ParamSegment{std::move(name), offset, length, trainable});
  values_.resize(offset + length, 0.0);
  return offset;
}

const ParamSegment& ParamVector::segment_info(std::string_view name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return s;
  }
  throw Error("no parameter segment named '" + std::string(name) + "'");
}

std::span<double> ParamVector::segment(std::string_view name) {
  const auto& s = segment_info(name);
  return std::span<double>(values_).subspan(s.offset, s.length);
}

std::span<const double> ParamVector::segment(std::string_view name) const {
  const auto& s = segment_info(name);
  return std::span<const double>(values_).subspan(s.offset, s.length);
}

void ParamVector::set_trainable(std::string_view name, bool trainable) {
  for (auto& s : segments_) {
    if (s.name == name) {
      s.trainable = trainable;
      return;
    }
  }
  throw Error("no parameter segment named '" + std::string(name) + "'");
}

void ParamVector::set_all_trainable(bool trainable) {
  for (auto& s : segments_) s.trainable = trainable;
}

std::size_t ParamVector::trainable_segment_count() const {
  return static_cast<std::size_t>(
      std::count_if(segments_.begin(), segments_.end(), [](const auto& s) { return s.trainable; }));
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (segments_.size() != other.segments_.size() || values_.size() != other.values_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& a = segments_[i];
    const auto& b = other.segments_[i];
    if (a.name != b.name || a.offset != b.offset || a.length != b.length) return false;
  }
  return true;
}

ParamVector ParamVector::zeros_like() const {
  ParamVector out;
  out.segments_ = segments_;
  out.values_.assign(values_.size(), 0.0);
  return out;
}

void ParamVector::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ParamVector::assign_values(std::span<const double> values) {
  if (values.size() != values_.size()) throw Error("assign_values: size mismatch");
  std::copy(values.begin(), values.end(), values_.begin());
}

ParamVector ParamVector::from_parts(std::vector<ParamSegment> segments, std::vector<double> values) {
  std::size_t expected = 0;
  for (const auto& s : segments) {
    if (s.offset != expected) throw Error("parameter segments do not tile the value array");
    expected += s.length;
  }
  if (expected != values.size()) throw Error("parameter segments do not cover the value array");
  ParamVector out;
  out.segments_ = std::move(segments);
  out.values_ = std::move(values);
  return out;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("l2_distance: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

}  // namespace sslmatch
