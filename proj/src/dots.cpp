#include "nda/dots.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nda/error.hpp"

namespace nda {

void DotsSpec::validate() const {
  if (image_size <= 0 || dot_count < 0 || !(radius > 0.0)) {
    throw FeasibilityError("dots spec: size and radius must be positive, count non-negative");
  }
  const double usable = image_size - 1.0 - 2.0 * radius;
  if (dot_count > 0 && usable < 0.0) throw FeasibilityError("dots spec: a dot does not fit in the image");
  // Disks of radius sep/2 around the centers are disjoint and lie inside the
  // usable square grown by sep/2 on every side.
  const double sep = separation();
  const double side = usable + sep;
  const double needed = dot_count * std::numbers::pi * 0.25 * sep * sep;
  if (dot_count > 1 && needed > side * side) {
    throw FeasibilityError("dots spec: " + std::to_string(dot_count) + " dots cannot fit at separation " +
                           std::to_string(sep));
  }
}

Image make_dots_image(const DotsSpec &spec, Rng &rng) {
  spec.validate();
  const int size = spec.image_size;
  const double r = spec.radius;
  const double sep = spec.separation();
  const double span = size - 1.0 - 2.0 * r;
  std::vector<double> pixels(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), 0.0);
  std::vector<std::pair<double, double>> centers;
  for (int d = 0; d < spec.dot_count; ++d) {
    int rejections = 0;
    double cy = 0.0, cx = 0.0;
    for (;;) {
      cy = r + span * rng.uniform();
      cx = r + span * rng.uniform();
      bool ok = true;
      for (const auto &[oy, ox] : centers) {
        if (std::hypot(cy - oy, cx - ox) < sep) {
          ok = false;
          break;
        }
      }
      if (ok) break;
      if (++rejections >= 10000) throw FeasibilityError("dots: 10^4 consecutive placement rejections");
    }
    centers.emplace_back(cy, cx);
    const double intensity = 1.0 - 0.5 * rng.uniform();
    const int y0 = static_cast<int>(std::floor(cy - r)), y1 = static_cast<int>(std::ceil(cy + r));
    const int x0 = static_cast<int>(std::floor(cx - r)), x1 = static_cast<int>(std::ceil(cx + r));
    for (int y = std::max(y0, 0); y <= std::min(y1, size - 1); ++y) {
      for (int x = std::max(x0, 0); x <= std::min(x1, size - 1); ++x) {
        const double dy = y - cy, dx = x - cx;
        if (dy * dy + dx * dx < r * r) pixels[static_cast<std::size_t>(y * size + x)] = intensity;
      }
    }
  }
  return Image(size, size, 1, std::move(pixels));
}

std::vector<Image> make_dots_dataset(const DotsSpec &spec, std::size_t count, Rng &rng) {
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_dots_image(spec, rng));
  return out;
}

} // namespace nda
