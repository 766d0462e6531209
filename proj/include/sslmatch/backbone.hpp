#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sslmatch/image.hpp"
#include "sslmatch/losses.hpp"
#include "sslmatch/params.hpp"

namespace sslmatch {

/// Activations retained by a training forward pass for the matching backward.
class ForwardTape {
 public:
  virtual ~ForwardTape() = default;
};

/// Classifier f(x; theta). Parameters live in a ParamVector so optimizers and
/// the EMA teacher operate on a flat view. Inference can run against any
/// parameter set with the same layout, which is how the teacher is evaluated
/// without copying the model.
class Backbone {
 public:
  virtual ~Backbone() = default;

  [[nodiscard]] virtual std::string architecture_id() const = 0;
  /// Integer shape arguments needed to rebuild the architecture.
  [[nodiscard]] virtual std::map<std::string, std::int64_t> architecture_args() const = 0;
  [[nodiscard]] virtual int num_classes() const = 0;
  [[nodiscard]] virtual int input_channels() const = 0;
  /// Name of the segment holding the final classification layer.
  [[nodiscard]] virtual std::string final_segment() const = 0;
  [[nodiscard]] virtual std::unique_ptr<Backbone> clone() const = 0;

  [[nodiscard]] ParamVector& params() { return params_; }
  [[nodiscard]] const ParamVector& params() const { return params_; }

  /// Inference with the model's own parameters.
  [[nodiscard]] std::vector<Logits> forward(std::span<const Image> batch) const {
    return forward_with(params_, batch);
  }
  [[nodiscard]] virtual std::vector<Logits> forward_with(const ParamVector& params,
                                                         std::span<const Image> batch) const = 0;

  /// Training forward: fills `logits` and returns the tape for `backward`.
  virtual std::unique_ptr<ForwardTape> forward_train(std::span<const Image> batch,
                                                     std::vector<Logits>& logits) const = 0;

  /// Accumulates dLoss/dtheta into `grad` (same layout as params()).
  virtual void backward(const ForwardTape& tape, std::span<const Logits> dlogits,
                        ParamVector& grad) const = 0;

  bool pretrained = false;

 protected:
  ParamVector params_;
};

/// Two 3x3 conv blocks (conv, ReLU, 2x2 max-pool) followed by global average
/// pooling and a linear head. Segments: "conv1", "conv2", "head".
class TinyCnn final : public Backbone {
 public:
  struct Shape {
    int input_channels = 3;
    int width1 = 16;
    int width2 = 32;
    int num_classes = 4;
  };

  explicit TinyCnn(Shape shape);

  /// He-normal conv/head weights, zero biases.
  void initialize(std::uint64_t seed);

  [[nodiscard]] std::string architecture_id() const override { return "tiny-cnn"; }
  [[nodiscard]] std::map<std::string, std::int64_t> architecture_args() const override;
  [[nodiscard]] int num_classes() const override { return shape_.num_classes; }
  [[nodiscard]] int input_channels() const override { return shape_.input_channels; }
  [[nodiscard]] std::string final_segment() const override { return "head"; }
  [[nodiscard]] std::unique_ptr<Backbone> clone() const override;

  [[nodiscard]] const Shape& shape() const { return shape_; }

  [[nodiscard]] std::vector<Logits> forward_with(const ParamVector& params,
                                                 std::span<const Image> batch) const override;
  std::unique_ptr<ForwardTape> forward_train(std::span<const Image> batch,
                                             std::vector<Logits>& logits) const override;
  void backward(const ForwardTape& tape, std::span<const Logits> dlogits,
                ParamVector& grad) const override;

 private:
  struct Tape;
  std::vector<Logits> run(const ParamVector& params, std::span<const Image> batch, Tape* tape) const;

  Shape shape_;
};

/// Builds an architecture by id. Only "tiny-cnn" ships with this build.
std::unique_ptr<Backbone> make_backbone(const std::string& architecture_id,
                                        const std::map<std::string, std::int64_t>& args);

}  // namespace sslmatch
