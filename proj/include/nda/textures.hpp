#pragma once

#include <vector>

#include "nda/image.hpp"
#include "nda/rng.hpp"

namespace nda {

enum class TextureClass { Stripes, Radial };

struct TextureSample {
  Image image;
  TextureClass label;
};

/// size x size grayscale patches.
///   Stripes: 0.5 + 0.5 sin(2 pi f (x cos a + y sin a) / size + phase),
///            a ~ U[0, pi), f ~ U[1.5, 4], phase ~ U[0, 2 pi).
///   Radial:  max(0, 1 - dist(p, c) / R), c ~ U[0, size)^2, R ~ U[0.5, 1] * size.
/// The two classes alternate, so any prefix is balanced.
std::vector<TextureSample> make_texture_dataset(int size, std::size_t count, Rng &rng);
Image make_texture(int size, TextureClass cls, Rng &rng);

/// Positive-pair augmentation: crop a square of side U{ceil(0.75 size) .. size}
/// at a uniform position, resize back with bilinear sampling, mirror with p = 1/2.
Image random_crop_flip(const Image &img, Rng &rng);

} // namespace nda
