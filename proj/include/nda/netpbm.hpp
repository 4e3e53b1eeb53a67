#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nda/image.hpp"

namespace nda {

/// Binary PGM (P5) or PPM (P6), maxval 255. Header comments are skipped.
Image load_image(const std::filesystem::path &path);
Image decode_netpbm(const std::vector<std::uint8_t> &bytes);

/// Writes P5 for one channel, P6 for three. Values quantized by round(v * 255).
/// The header is "P5\n<w> <h>\n255\n" with no comments, so output is byte-stable.
void save_image(const Image &img, const std::filesystem::path &path);
std::vector<std::uint8_t> encode_netpbm(const Image &img);

/// Tile equally-shaped images into a grid with a 1-pixel black border.
Image tile_images(const std::vector<Image> &images, int columns);

} // namespace nda
