#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nda {

/// H x W x C grid of reals in [0, 1], row-major with interleaved channels.
/// Immutable once constructed; the constructor enforces the invariants.
class Image {
public:
  Image(int height, int width, int channels, std::vector<double> pixels);

  /// Constant-valued image.
  static Image filled(int height, int width, int channels, double value);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  double at(int y, int x, int c = 0) const noexcept {
    return pixels_[index(y, x, c)];
  }
  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  std::span<const double> pixels() const noexcept { return pixels_; }

  bool same_shape(const Image &other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image &, const Image &) = default;

private:
  int height_;
  int width_;
  int channels_;
  std::vector<double> pixels_;
};

/// Clamp each value into [0, 1] and build an Image. Used wherever arithmetic
/// could drift outside the unit interval (generator outputs, mixup rounding).
Image image_from_clamped(int height, int width, int channels, std::vector<double> values);

/// Shape plus flat row-major data.
class TensorView {
public:
  TensorView(std::vector<int> shape, std::vector<double> data);

  const std::vector<int> &shape() const noexcept { return shape_; }
  std::span<const double> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }

  /// Rows x cols view of a 2-D tensor; 1-D tensors are one row.
  int rows() const noexcept;
  int cols() const noexcept;

private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

/// Flatten a batch of same-shaped images into a [batch, H*W*C] tensor.
TensorView batch_to_tensor(std::span<const Image> images);

} // namespace nda
