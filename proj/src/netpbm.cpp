#include "nda/netpbm.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "nda/error.hpp"
#include "nda/io.hpp"

namespace nda {
namespace {

class HeaderReader {
public:
  explicit HeaderReader(const std::vector<std::uint8_t> &bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_int(const char *what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
      throw FormatError(std::string("netpbm header: expected ") + what);
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000) throw FormatError(std::string("netpbm header: ") + what + " too large");
      ++pos_;
    }
    return v;
  }

  std::size_t pos() const noexcept { return pos_; }
  void advance() noexcept { ++pos_; }
  bool at_space() const noexcept { return pos_ < bytes_.size() && std::isspace(bytes_[pos_]); }

private:
  const std::vector<std::uint8_t> &bytes_;
  std::size_t pos_ = 2;
};

} // namespace

Image decode_netpbm(const std::vector<std::uint8_t> &bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("not a binary PGM/PPM file (expected P5 or P6 magic)");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader reader(bytes);
  const long width = reader.read_int("width");
  const long height = reader.read_int("height");
  const long maxval = reader.read_int("maxval");
  if (width <= 0 || height <= 0) throw FormatError("netpbm header: zero dimension");
  if (maxval != 255) {
    throw UnsupportedError("unsupported maxval " + std::to_string(maxval) + " (only 255)");
  }
  // Exactly one whitespace byte separates the header from the raster.
  if (!reader.at_space()) throw FormatError("netpbm header: missing separator before raster");
  reader.advance();

  const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                     static_cast<std::size_t>(channels);
  if (bytes.size() - reader.pos() < count) throw FormatError("netpbm raster truncated");
  std::vector<double> pixels(count);
  for (std::size_t i = 0; i < count; ++i) {
    pixels[i] = static_cast<double>(bytes[reader.pos() + i]) / 255.0;
  }
  return Image(static_cast<int>(height), static_cast<int>(width), channels, std::move(pixels));
}

Image load_image(const std::filesystem::path &path) { return decode_netpbm(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_netpbm(const Image &img) {
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (double v : img.pixels()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  }
  return out;
}

void save_image(const Image &img, const std::filesystem::path &path) {
  write_file_atomic(path, encode_netpbm(img));
}

Image tile_images(const std::vector<Image> &images, int columns) {
  if (images.empty()) throw ArgumentError("no images to tile");
  if (columns <= 0) throw ArgumentError("columns must be positive");
  const auto &first = images.front();
  const int n = static_cast<int>(images.size());
  const int cols = std::min(columns, n);
  const int rows = (n + cols - 1) / cols;
  const int h = rows * (first.height() + 1) + 1;
  const int w = cols * (first.width() + 1) + 1;
  const int c = first.channels();
  std::vector<double> grid(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
                               static_cast<std::size_t>(c),
                           0.0);
  for (int i = 0; i < n; ++i) {
    const auto &img = images[static_cast<std::size_t>(i)];
    if (!img.same_shape(first)) throw DimensionError("tiled images differ in shape");
    const int oy = 1 + (i / cols) * (first.height() + 1);
    const int ox = 1 + (i % cols) * (first.width() + 1);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        for (int ch = 0; ch < c; ++ch) {
          grid[(static_cast<std::size_t>(oy + y) * static_cast<std::size_t>(w) +
                static_cast<std::size_t>(ox + x)) *
                   static_cast<std::size_t>(c) +
               static_cast<std::size_t>(ch)] = img.at(y, x, ch);
        }
      }
    }
  }
  return Image(h, w, c, std::move(grid));
}

} // namespace nda
