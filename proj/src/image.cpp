#include "nda/image.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "nda/error.hpp"

namespace nda {

Image::Image(int height, int width, int channels, std::vector<double> pixels)
    : height_(height), width_(width), channels_(channels), pixels_(std::move(pixels)) {
  if (height <= 0 || width <= 0) {
    throw DimensionError("image dimensions must be positive");
  }
  if (channels != 1 && channels != 3) {
    throw DimensionError("image must have 1 or 3 channels, got " + std::to_string(channels));
  }
  const auto expected = static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
                        static_cast<std::size_t>(channels);
  if (pixels_.size() != expected) {
    throw DimensionError("pixel buffer has " + std::to_string(pixels_.size()) +
                         " values, expected " + std::to_string(expected));
  }
  for (double v : pixels_) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("pixel value outside [0,1]");
  }
}

Image Image::filled(int height, int width, int channels, double value) {
  const auto n = static_cast<std::size_t>(std::max(height, 0)) *
                 static_cast<std::size_t>(std::max(width, 0)) *
                 static_cast<std::size_t>(std::max(channels, 0));
  return Image(height, width, channels, std::vector<double>(n, value));
}

Image image_from_clamped(int height, int width, int channels, std::vector<double> values) {
  for (double &v : values) {
    if (std::isnan(v)) throw DomainError("NaN pixel value");
    v = std::clamp(v, 0.0, 1.0);
  }
  return Image(height, width, channels, std::move(values));
}

TensorView::TensorView(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw DimensionError("tensor shape must be non-empty");
  std::size_t n = 1;
  for (int d : shape_) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  if (n != data_.size()) throw DimensionError("tensor shape does not match data length");
}

int TensorView::rows() const noexcept {
  if (shape_.size() == 1) return 1;
  return static_cast<int>(data_.size() / static_cast<std::size_t>(shape_.back()));
}

int TensorView::cols() const noexcept { return shape_.back(); }

TensorView batch_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw ArgumentError("empty image batch");
  const auto &first = images.front();
  std::vector<double> data;
  data.reserve(images.size() * first.size());
  for (const auto &img : images) {
    if (!img.same_shape(first)) throw DimensionError("batch images differ in shape");
    data.insert(data.end(), img.pixels().begin(), img.pixels().end());
  }
  return TensorView({static_cast<int>(images.size()), static_cast<int>(first.size())},
                    std::move(data));
}

} // namespace nda
