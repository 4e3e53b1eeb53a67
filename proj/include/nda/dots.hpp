#pragma once

#include <vector>

#include "nda/image.hpp"
#include "nda/rng.hpp"

namespace nda {

/// Grayscale dots images: dot_count filled disks on a black background.
struct DotsSpec {
  int image_size = 28;
  int dot_count = 6;
  double radius = 2.0;
  double min_separation = -1.0; // center distance; negative means 2 * radius + 1

  double separation() const { return min_separation < 0.0 ? 2.0 * radius + 1.0 : min_separation; }
  /// Throws FeasibilityError when the dots cannot fit (disk-packing area bound).
  void validate() const;
};

/// Centers are continuous, uniform over [r, size - 1 - r]^2 and placed one at a
/// time by rejection against the separation constraint. A disk covers pixels
/// whose centers lie strictly within `radius` of the dot center; intensity is
/// 1 - 0.5 u, so every dot is strictly brighter than 0.5. Draw order per dot:
/// cy, cx (repeated until accepted), intensity. Throws FeasibilityError after
/// 10^4 consecutive rejections.
Image make_dots_image(const DotsSpec &spec, Rng &rng);

std::vector<Image> make_dots_dataset(const DotsSpec &spec, std::size_t count, Rng &rng);

} // namespace nda
