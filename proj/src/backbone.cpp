#include "sslmatch/backbone.hpp"

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

#include "sslmatch/common.hpp"

namespace sslmatch {
namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

// Activations are stored channel-major over the whole batch: row = channel,
// column = n * H * W + y * W + x.
struct Dims {
  int n = 0;
  int h = 0;
  int w = 0;
  [[nodiscard]] Eigen::Index cols() const { return static_cast<Eigen::Index>(n) * h * w; }
};

// 3x3, stride 1, zero padding 1. Row index = channel * 9 + ky * 3 + kx.
Matrix im2col(const Matrix& input, Dims d) {
  const auto channels = input.rows();
  Matrix cols(channels * 9, d.cols());
  const Eigen::Index plane = static_cast<Eigen::Index>(d.h) * d.w;
  for (Eigen::Index c = 0; c < channels; ++c) {
    const double* src = input.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = cols.row(c * 9 + ky * 3 + kx).data();
        for (int n = 0; n < d.n; ++n) {
          const double* sp = src + n * plane;
          double* dp = dst + n * plane;
          for (int y = 0; y < d.h; ++y) {
            const int sy = y + ky - 1;
            double* drow = dp + static_cast<Eigen::Index>(y) * d.w;
            if (sy < 0 || sy >= d.h) {
              std::fill(drow, drow + d.w, 0.0);
              continue;
            }
            const double* srow = sp + static_cast<Eigen::Index>(sy) * d.w;
            for (int x = 0; x < d.w; ++x) {
              const int sx = x + kx - 1;
              drow[x] = (sx < 0 || sx >= d.w) ? 0.0 : srow[sx];
            }
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col.
Matrix col2im(const Matrix& cols, Eigen::Index channels, Dims d) {
  Matrix out = Matrix::Zero(channels, d.cols());
  const Eigen::Index plane = static_cast<Eigen::Index>(d.h) * d.w;
  for (Eigen::Index c = 0; c < channels; ++c) {
    double* dst = out.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = cols.row(c * 9 + ky * 3 + kx).data();
        for (int n = 0; n < d.n; ++n) {
          const double* sp = src + n * plane;
          double* dp = dst + n * plane;
          for (int y = 0; y < d.h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= d.h) continue;
            const double* srow = sp + static_cast<Eigen::Index>(y) * d.w;
            double* drow = dp + static_cast<Eigen::Index>(sy) * d.w;
            for (int x = 0; x < d.w; ++x) {
              const int sx = x + kx - 1;
              if (sx >= 0 && sx < d.w) drow[sx] += srow[x];
            }
          }
        }
      }
    }
  }
  return out;
}

// 2x2 stride-2 max pooling (floor). `argmax` receives the input column of the
// selected element for each output element.
Matrix max_pool(const Matrix& input, Dims d, std::vector<std::int32_t>* argmax) {
  const int ho = d.h / 2;
  const int wo = d.w / 2;
  const Eigen::Index in_plane = static_cast<Eigen::Index>(d.h) * d.w;
  const Eigen::Index out_plane = static_cast<Eigen::Index>(ho) * wo;
  Matrix out(input.rows(), static_cast<Eigen::Index>(d.n) * out_plane);
  if (argmax) argmax->resize(static_cast<std::size_t>(out.size()));
  for (Eigen::Index c = 0; c < input.rows(); ++c) {
    const double* src = input.row(c).data();
    double* dst = out.row(c).data();
    for (int n = 0; n < d.n; ++n) {
      for (int y = 0; y < ho; ++y) {
        for (int x = 0; x < wo; ++x) {
          Eigen::Index best = n * in_plane + (2 * y) * d.w + 2 * x;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const Eigen::Index idx = n * in_plane + (2 * y + dy) * d.w + (2 * x + dx);
              if (src[idx] > src[best]) best = idx;
            }
          }
          const Eigen::Index o = n * out_plane + y * wo + x;
          dst[o] = src[best];
          if (argmax) (*argmax)[static_cast<std::size_t>(c * out.cols() + o)] = static_cast<std::int32_t>(best);
        }
      }
    }
  }
  return out;
}

Matrix max_pool_backward(const Matrix& grad_out, const std::vector<std::int32_t>& argmax,
                         Eigen::Index in_cols) {
  Matrix grad_in = Matrix::Zero(grad_out.rows(), in_cols);
  for (Eigen::Index c = 0; c < grad_out.rows(); ++c) {
    const double* g = grad_out.row(c).data();
    double* dst = grad_in.row(c).data();
    const std::int32_t* idx = argmax.data() + c * grad_out.cols();
    for (Eigen::Index o = 0; o < grad_out.cols(); ++o) dst[idx[o]] += g[o];
  }
  return grad_in;
}

struct ConvWeights {
  ConstMatrixMap weight;
  ConstVectorMap bias;
};

ConvWeights conv_weights(const ParamVector& params, std::string_view segment, Eigen::Index out,
                         Eigen::Index fan_in) {
  const auto seg = params.segment(segment);
  if (static_cast<Eigen::Index>(seg.size()) != out * fan_in + out) {
    throw Error("parameter segment '" + std::string(segment) + "' has an unexpected size");
  }
  return {ConstMatrixMap(seg.data(), out, fan_in), ConstVectorMap(seg.data() + out * fan_in, out)};
}

}  // namespace

struct TinyCnn::Tape final : ForwardTape {
  Dims d1, d2;
  Matrix cols1, act1;
  std::vector<std::int32_t> pool1_idx;
  Matrix cols2, act2;
  std::vector<std::int32_t> pool2_idx;
  Eigen::Index pool2_plane = 0;
  Matrix features;  // width2 x N
};

TinyCnn::TinyCnn(Shape shape) : shape_(shape) {
  if (shape_.input_channels < 1 || shape_.width1 < 1 || shape_.width2 < 1 || shape_.num_classes < 2) {
    throw Error("tiny-cnn: invalid shape");
  }
  params_.add_segment("conv1", static_cast<std::size_t>(shape_.width1) * (shape_.input_channels * 9 + 1));
  params_.add_segment("conv2", static_cast<std::size_t>(shape_.width2) * (shape_.width1 * 9 + 1));
  params_.add_segment("head", static_cast<std::size_t>(shape_.num_classes) * (shape_.width2 + 1));
}

void TinyCnn::initialize(std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](std::string_view name, int out, int fan_in) {
    auto seg = params_.segment(name);
    const double scale = std::sqrt(2.0 / fan_in);
    for (int i = 0; i < out * fan_in; ++i) seg[static_cast<std::size_t>(i)] = scale * normal(rng);
    for (std::size_t i = static_cast<std::size_t>(out) * fan_in; i < seg.size(); ++i) seg[i] = 0.0;
  };
  fill("conv1", shape_.width1, shape_.input_channels * 9);
  fill("conv2", shape_.width2, shape_.width1 * 9);
  fill("head", shape_.num_classes, shape_.width2);
  auto head = params_.segment("head");
  for (std::size_t i = 0; i < static_cast<std::size_t>(shape_.num_classes) * shape_.width2; ++i) {
    head[i] *= 0.5;
  }
}

std::map<std::string, std::int64_t> TinyCnn::architecture_args() const {
  return {{"input_channels", shape_.input_channels},
          {"width1", shape_.width1},
          {"width2", shape_.width2},
          {"num_classes", shape_.num_classes}};
}

std::unique_ptr<Backbone> TinyCnn::clone() const { return std::make_unique<TinyCnn>(*this); }

std::vector<Logits> TinyCnn::run(const ParamVector& params, std::span<const Image> batch,
                                 Tape* tape) const {
  if (batch.empty()) return {};
  if (!params.same_layout(params_)) throw Error("tiny-cnn: parameter layout mismatch");
  const Image& first = batch.front();
  for (const auto& img : batch) {
    if (img.channels != shape_.input_channels) {
      throw Error("tiny-cnn: expected " + std::to_string(shape_.input_channels) +
                  "-channel input, got " + std::to_string(img.channels));
    }
    if (img.height != first.height || img.width != first.width) {
      throw Error("tiny-cnn: images in a batch must share one size");
    }
  }
  if (first.height < 4 || first.width < 4) throw Error("tiny-cnn: input must be at least 4x4");

  const Dims d1{static_cast<int>(batch.size()), first.height, first.width};
  const Eigen::Index plane = static_cast<Eigen::Index>(d1.h) * d1.w;
  Matrix input(shape_.input_channels, d1.cols());
  for (int n = 0; n < d1.n; ++n) {
    const auto& img = batch[static_cast<std::size_t>(n)];
    for (int c = 0; c < shape_.input_channels; ++c) {
      const float* src = img.pixels.data() + c * plane;
      double* dst = input.row(c).data() + n * plane;
      for (Eigen::Index i = 0; i < plane; ++i) dst[i] = src[i];
    }
  }

  const auto conv1 = conv_weights(params, "conv1", shape_.width1, shape_.input_channels * 9);
  Matrix cols1 = im2col(input, d1);
  Matrix act1 = conv1.weight * cols1;
  act1.colwise() += conv1.bias;
  act1 = act1.cwiseMax(0.0);

  std::vector<std::int32_t> idx1;
  Matrix pooled1 = max_pool(act1, d1, tape ? &idx1 : nullptr);
  const Dims d2{d1.n, d1.h / 2, d1.w / 2};

  const auto conv2 = conv_weights(params, "conv2", shape_.width2, shape_.width1 * 9);
  Matrix cols2 = im2col(pooled1, d2);
  Matrix act2 = conv2.weight * cols2;
  act2.colwise() += conv2.bias;
  act2 = act2.cwiseMax(0.0);

  std::vector<std::int32_t> idx2;
  Matrix pooled2 = max_pool(act2, d2, tape ? &idx2 : nullptr);
  const Eigen::Index plane2 = static_cast<Eigen::Index>(d2.h / 2) * (d2.w / 2);

  Matrix features(shape_.width2, d1.n);
  for (Eigen::Index c = 0; c < shape_.width2; ++c) {
    for (int n = 0; n < d1.n; ++n) {
      features(c, n) = pooled2.row(c).segment(n * plane2, plane2).sum() / static_cast<double>(plane2);
    }
  }

  const auto head = conv_weights(params, "head", shape_.num_classes, shape_.width2);
  Matrix logits = head.weight * features;
  logits.colwise() += head.bias;

  std::vector<Logits> out(static_cast<std::size_t>(d1.n), Logits(static_cast<std::size_t>(shape_.num_classes)));
  for (int n = 0; n < d1.n; ++n) {
    for (int k = 0; k < shape_.num_classes; ++k) out[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)] = logits(k, n);
  }

  if (tape) {
    tape->d1 = d1;
    tape->d2 = d2;
    tape->cols1 = std::move(cols1);
    tape->act1 = std::move(act1);
    tape->pool1_idx = std::move(idx1);
    tape->cols2 = std::move(cols2);
    tape->act2 = std::move(act2);
    tape->pool2_idx = std::move(idx2);
    tape->pool2_plane = plane2;
    tape->features = std::move(features);
  }
  return out;
}

std::vector<Logits> TinyCnn::forward_with(const ParamVector& params, std::span<const Image> batch) const {
  return run(params, batch, nullptr);
}

std::unique_ptr<ForwardTape> TinyCnn::forward_train(std::span<const Image> batch,
                                                    std::vector<Logits>& logits) const {
  auto tape = std::make_unique<Tape>();
  logits = run(params_, batch, tape.get());
  return tape;
}

void TinyCnn::backward(const ForwardTape& base, std::span<const Logits> dlogits, ParamVector& grad) const {
  const auto* tape = dynamic_cast<const Tape*>(&base);
  if (!tape) throw Error("tiny-cnn: tape from a different architecture");
  if (!grad.same_layout(params_)) throw Error("tiny-cnn: gradient layout mismatch");
  const int n = tape->d1.n;
  if (n == 0) return;
  if (static_cast<int>(dlogits.size()) != n) throw Error("tiny-cnn: dlogits batch size mismatch");

  const Eigen::Index classes = shape_.num_classes;
  Matrix d_logits(classes, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(dlogits[static_cast<std::size_t>(i)].size()) != classes) {
      throw Error("tiny-cnn: dlogits width mismatch");
    }
    for (Eigen::Index k = 0; k < classes; ++k) d_logits(k, i) = dlogits[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }

  auto accumulate = [&](std::string_view name, Eigen::Index out, Eigen::Index fan_in,
                        const Matrix& d_out, const Matrix& inputs) {
    auto seg = grad.segment(name);
    MatrixMap dw(seg.data(), out, fan_in);
    VectorMap db(seg.data() + out * fan_in, out);
    dw.noalias() += d_out * inputs.transpose();
    db += d_out.rowwise().sum();
  };

  // head
  const auto head = conv_weights(params_, "head", classes, shape_.width2);
  accumulate("head", classes, shape_.width2, d_logits, tape->features);
  const Matrix d_features = head.weight.transpose() * d_logits;

  // global average pool
  const Eigen::Index plane2 = tape->pool2_plane;
  Matrix d_pooled2(shape_.width2, static_cast<Eigen::Index>(n) * plane2);
  for (Eigen::Index c = 0; c < shape_.width2; ++c) {
    for (int i = 0; i < n; ++i) {
      d_pooled2.row(c).segment(i * plane2, plane2).setConstant(d_features(c, i) / static_cast<double>(plane2));
    }
  }

  // conv2 block
  Matrix d_act2 = max_pool_backward(d_pooled2, tape->pool2_idx, tape->act2.cols());
  d_act2 = d_act2.cwiseProduct((tape->act2.array() > 0.0).cast<double>().matrix());
  accumulate("conv2", shape_.width2, shape_.width1 * 9, d_act2, tape->cols2);
  const auto conv2 = conv_weights(params_, "conv2", shape_.width2, shape_.width1 * 9);
  const Matrix d_cols2 = conv2.weight.transpose() * d_act2;
  const Matrix d_pooled1 = col2im(d_cols2, shape_.width1, tape->d2);

  // conv1 block
  Matrix d_act1 = max_pool_backward(d_pooled1, tape->pool1_idx, tape->act1.cols());
  d_act1 = d_act1.cwiseProduct((tape->act1.array() > 0.0).cast<double>().matrix());
  accumulate("conv1", shape_.width1, shape_.input_channels * 9, d_act1, tape->cols1);
}

std::unique_ptr<Backbone> make_backbone(const std::string& architecture_id,
                                        const std::map<std::string, std::int64_t>& args) {
  auto get = [&](const char* key, std::int64_t fallback) {
    const auto it = args.find(key);
    return static_cast<int>(it == args.end() ? fallback : it->second);
  };
  if (architecture_id == "tiny-cnn") {
    TinyCnn::Shape shape;
    shape.input_channels = get("input_channels", 3);
    shape.width1 = get("width1", 16);
    shape.width2 = get("width2", 32);
    shape.num_classes = get("num_classes", 4);
    return std::make_unique<TinyCnn>(shape);
  }
  throw ConfigError("architecture '" + architecture_id +
                    "' is not available in this build (supported: tiny-cnn)");
}

}  // namespace sslmatch
