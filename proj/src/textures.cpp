#include "nda/textures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nda/error.hpp"

namespace nda {

Image make_texture(int size, TextureClass cls, Rng &rng) {
  std::vector<double> px(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
  if (cls == TextureClass::Stripes) {
    const double angle = std::numbers::pi * rng.uniform();
    const double freq = 1.5 + 2.5 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        px[static_cast<std::size_t>(y * size + x)] =
            0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * freq * (x * ca + y * sa) / size + phase);
  } else {
    const double cy = size * rng.uniform();
    const double cx = size * rng.uniform();
    const double radius = (0.5 + 0.5 * rng.uniform()) * size;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        px[static_cast<std::size_t>(y * size + x)] =
            std::max(0.0, 1.0 - std::hypot(y - cy, x - cx) / radius);
  }
  return image_from_clamped(size, size, 1, std::move(px));
}

std::vector<TextureSample> make_texture_dataset(int size, std::size_t count, Rng &rng) {
  if (size < 4) throw DimensionError("texture size must be at least 4");
  std::vector<TextureSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto cls = i % 2 == 0 ? TextureClass::Stripes : TextureClass::Radial;
    out.push_back({make_texture(size, cls, rng), cls});
  }
  return out;
}

Image random_crop_flip(const Image &img, Rng &rng) {
  const int h = img.height(), w = img.width(), c = img.channels();
  const int side_max = std::min(h, w);
  const int side_min = std::max(1, static_cast<int>(std::ceil(0.75 * side_max)));
  const int side = rng.uniform_int(side_min, side_max);
  const int top = rng.uniform_int(0, h - side);
  const int left = rng.uniform_int(0, w - side);
  const bool flip = rng.below(2) == 1;
  std::vector<double> out(img.size());
  for (int y = 0; y < h; ++y) {
    // Map output pixel centers onto the crop.
    const double sy = std::clamp(top + (y + 0.5) * side / h - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < w; ++x) {
      const int ox = flip ? w - 1 - x : x;
      const double sx = std::clamp(left + (x + 0.5) * side / w - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top_v = (1 - fx) * img.at(y0, x0, ch) + fx * img.at(y0, x1, ch);
        const double bot_v = (1 - fx) * img.at(y1, x0, ch) + fx * img.at(y1, x1, ch);
        out[img.index(y, ox, ch)] = (1 - fy) * top_v + fy * bot_v;
      }
    }
  }
  return image_from_clamped(h, w, c, std::move(out));
}

} // namespace nda
