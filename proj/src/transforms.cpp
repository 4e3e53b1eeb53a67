#include "nda/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nda/error.hpp"

namespace nda {
namespace {

void require_same_shape(const Image &a, const Image &b, const char *op) {
  if (!a.same_shape(b)) throw DimensionError(std::string(op) + ": images differ in shape");
}

bool is_identity(std::span<const int> perm) {
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] != static_cast<int>(i)) return false;
  }
  return true;
}

void check_jigsaw_dims(const Image &img, int k) {
  if (k < 2) throw ArgumentError("jigsaw grid size must be >= 2");
  if (img.height() % k != 0 || img.width() % k != 0) {
    throw DimensionError("jigsaw: k=" + std::to_string(k) + " does not divide " +
                         std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
}

} // namespace

std::string_view to_string(TransformKind kind) {
  switch (kind) {
  case TransformKind::Jigsaw: return "jigsaw";
  case TransformKind::Stitching: return "stitching";
  case TransformKind::Cutout: return "cutout";
  case TransformKind::Cutmix: return "cutmix";
  case TransformKind::Mixup: return "mixup";
  case TransformKind::OtherClass: return "other-class";
  }
  return "unknown";
}

TransformKind parse_transform_kind(std::string_view name) {
  if (name == "jigsaw") return TransformKind::Jigsaw;
  if (name == "stitching" || name == "stitch") return TransformKind::Stitching;
  if (name == "cutout") return TransformKind::Cutout;
  if (name == "cutmix") return TransformKind::Cutmix;
  if (name == "mixup") return TransformKind::Mixup;
  if (name == "other-class" || name == "otherclass") return TransformKind::OtherClass;
  throw ArgumentError("unknown transform kind '" + std::string(name) + "'");
}

void TransformSpec::validate() const {
  if (k < 2) throw ArgumentError("transform spec: k must be >= 2");
  if (!(alpha > 0.0)) throw ArgumentError("transform spec: alpha must be positive");
  if (!(cut_patch_frac_min > 0.0 && cut_patch_frac_min <= cut_patch_frac_max &&
        cut_patch_frac_max <= 1.0)) {
    throw ArgumentError("transform spec: need 0 < cutPatchFracMin <= cutPatchFracMax <= 1");
  }
}

Image jigsaw_with_permutation(const Image &img, int k, std::span<const int> permutation) {
  check_jigsaw_dims(img, k);
  const auto tiles = static_cast<std::size_t>(k * k);
  if (permutation.size() != tiles) throw ArgumentError("jigsaw: permutation has wrong length");
  std::vector<int> sorted(permutation.begin(), permutation.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < tiles; ++i) {
    if (sorted[i] != static_cast<int>(i)) throw ArgumentError("jigsaw: not a permutation");
  }

  const int th = img.height() / k;
  const int tw = img.width() / k;
  const int c = img.channels();
  std::vector<double> out(img.size());
  const auto src = img.pixels();
  for (int slot = 0; slot < k * k; ++slot) {
    const int from = permutation[static_cast<std::size_t>(slot)];
    const int dy = (slot / k) * th, dx = (slot % k) * tw;
    const int sy = (from / k) * th, sx = (from % k) * tw;
    for (int y = 0; y < th; ++y) {
      const auto s = img.index(sy + y, sx, 0);
      const auto d = img.index(dy + y, dx, 0);
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(s), tw * c,
                  out.begin() + static_cast<std::ptrdiff_t>(d));
    }
  }
  return Image(img.height(), img.width(), c, std::move(out));
}

Transformed jigsaw(const Image &img, int k, Rng &rng) {
  check_jigsaw_dims(img, k);
  std::vector<int> perm;
  do {
    perm = random_permutation(rng, k * k);
  } while (is_identity(perm));
  Image out = jigsaw_with_permutation(img, k, perm);
  TransformMeta meta;
  meta.permutation = std::move(perm);
  return {std::move(out), std::move(meta)};
}

Image stitch(const Image &a, const Image &b, StitchOrientation orientation) {
  require_same_shape(a, b, "stitching");
  if (a.height() % 2 != 0 || a.width() % 2 != 0) {
    throw DimensionError("stitching: height and width must be even");
  }
  std::vector<double> out(a.size());
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const bool first = orientation == StitchOrientation::Horizontal ? y < a.height() / 2
                                                                      : x < a.width() / 2;
      for (int ch = 0; ch < a.channels(); ++ch) {
        const auto i = a.index(y, x, ch);
        out[i] = first ? pa[i] : pb[i];
      }
    }
  }
  return Image(a.height(), a.width(), a.channels(), std::move(out));
}

Transformed stitching(const Image &a, const Image &b, Rng &rng) {
  require_same_shape(a, b, "stitching");
  const auto orientation = rng.below(2) == 0 ? StitchOrientation::Horizontal
                                             : StitchOrientation::Vertical;
  TransformMeta meta;
  meta.orientation = orientation;
  return {stitch(a, b, orientation), std::move(meta)};
}

PatchRect draw_patch(int height, int width, const TransformSpec &spec, Rng &rng) {
  spec.validate();
  if (height < 3 || width < 3) throw DimensionError("cutout/cutmix need an image of at least 3x3");
  const auto range = [&](int extent) {
    const int lo = std::max(1, static_cast<int>(std::ceil(extent * spec.cut_patch_frac_min - 1e-12)));
    const int hi = std::min(extent, static_cast<int>(std::floor(extent * spec.cut_patch_frac_max + 1e-12)));
    if (lo > hi) throw ArgumentError("patch fraction range is empty for extent " + std::to_string(extent));
    return std::pair{lo, hi};
  };
  const auto [hlo, hhi] = range(height);
  const auto [wlo, whi] = range(width);
  PatchRect rect;
  rect.height = rng.uniform_int(hlo, hhi);
  rect.width = rng.uniform_int(wlo, whi);
  rect.top = rng.uniform_int(0, height - rect.height);
  rect.left = rng.uniform_int(0, width - rect.width);
  return rect;
}

Image cutout_at(const Image &img, const PatchRect &patch, bool zero_fill) {
  if (patch.height <= 0 || patch.width <= 0 || patch.top < 0 || patch.left < 0 ||
      patch.top + patch.height > img.height() || patch.left + patch.width > img.width()) {
    throw DimensionError("cutout: patch outside image");
  }
  const int c = img.channels();
  std::vector<double> out(img.pixels().begin(), img.pixels().end());
  for (int ch = 0; ch < c; ++ch) {
    double fill = 0.0;
    if (!zero_fill) {
      // Shifted by the patch minimum so a constant patch keeps its exact value.
      double lo = img.at(patch.top, patch.left, ch);
      for (int y = patch.top; y < patch.top + patch.height; ++y)
        for (int x = patch.left; x < patch.left + patch.width; ++x) lo = std::min(lo, img.at(y, x, ch));
      double sum = 0.0;
      for (int y = patch.top; y < patch.top + patch.height; ++y)
        for (int x = patch.left; x < patch.left + patch.width; ++x) sum += img.at(y, x, ch) - lo;
      fill = lo + sum / static_cast<double>(patch.height * patch.width);
    }
    for (int y = patch.top; y < patch.top + patch.height; ++y)
      for (int x = patch.left; x < patch.left + patch.width; ++x) out[img.index(y, x, ch)] = fill;
  }
  return image_from_clamped(img.height(), img.width(), c, std::move(out));
}

Transformed cutout(const Image &img, const TransformSpec &spec, Rng &rng) {
  const PatchRect rect = draw_patch(img.height(), img.width(), spec, rng);
  TransformMeta meta;
  meta.patch = rect;
  return {cutout_at(img, rect, spec.zero_fill), std::move(meta)};
}

Image cutmix_at(const Image &img, const Image &donor, const PatchRect &patch) {
  require_same_shape(img, donor, "cutmix");
  if (patch.height <= 0 || patch.width <= 0 || patch.top < 0 || patch.left < 0 ||
      patch.top + patch.height > img.height() || patch.left + patch.width > img.width()) {
    throw DimensionError("cutmix: patch outside image");
  }
  std::vector<double> out(img.pixels().begin(), img.pixels().end());
  for (int y = patch.top; y < patch.top + patch.height; ++y)
    for (int x = patch.left; x < patch.left + patch.width; ++x)
      for (int ch = 0; ch < img.channels(); ++ch) out[img.index(y, x, ch)] = donor.at(y, x, ch);
  return Image(img.height(), img.width(), img.channels(), std::move(out));
}

Transformed cutmix(const Image &img, const Image &donor, const TransformSpec &spec, Rng &rng) {
  require_same_shape(img, donor, "cutmix");
  const PatchRect rect = draw_patch(img.height(), img.width(), spec, rng);
  TransformMeta meta;
  meta.patch = rect;
  return {cutmix_at(img, donor, rect), std::move(meta)};
}

Image mixup_with_gamma(const Image &img, const Image &other, double gamma) {
  require_same_shape(img, other, "mixup");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ArgumentError("mixup: gamma outside [0,1]");
  std::vector<double> out(img.size());
  const auto a = img.pixels();
  const auto b = other.pixels();
  // gamma*a + (1-gamma)*b in interpolation form, anchored at the nearer endpoint:
  // gamma = 1 returns a exactly, and mixup(a,b,g) + mixup(b,a,g) == a + b.
  if (gamma >= 0.5) {
    const double beta = 1.0 - gamma;  // exact for gamma in [1/2, 1]
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + beta * (b[i] - a[i]);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = b[i] + gamma * (a[i] - b[i]);
  }
  return image_from_clamped(img.height(), img.width(), img.channels(), std::move(out));
}

Transformed mixup(const Image &img, const Image &other, double alpha, Rng &rng) {
  require_same_shape(img, other, "mixup");
  if (!(alpha > 0.0)) throw ArgumentError("mixup: alpha must be positive");
  const double gamma = rng.beta(alpha, alpha);
  TransformMeta meta;
  meta.gamma = gamma;
  return {mixup_with_gamma(img, other, gamma), std::move(meta)};
}

Transformed other_class_negative(std::span<const Image> pool, Rng &rng) {
  if (pool.empty()) throw ArgumentError("other-class negative: empty pool");
  const auto idx = static_cast<std::size_t>(rng.below(static_cast<std::uint32_t>(pool.size())));
  TransformMeta meta;
  meta.pool_index = idx;
  return {pool[idx], std::move(meta)};
}

Transformed apply_transform(const TransformSpec &spec, const Image &img, const Image *donor,
                            std::span<const Image> pool, Rng &rng) {
  spec.validate();
  const auto need_donor = [&]() -> const Image & {
    if (donor == nullptr) {
      throw ArgumentError(std::string(to_string(spec.kind)) + " needs a second image");
    }
    return *donor;
  };
  switch (spec.kind) {
  case TransformKind::Jigsaw: return jigsaw(img, spec.k, rng);
  case TransformKind::Stitching: return stitching(img, need_donor(), rng);
  case TransformKind::Cutout: return cutout(img, spec, rng);
  case TransformKind::Cutmix: return cutmix(img, need_donor(), spec, rng);
  case TransformKind::Mixup: return mixup(img, need_donor(), spec.alpha, rng);
  case TransformKind::OtherClass: return other_class_negative(pool, rng);
  }
  throw ArgumentError("unknown transform kind");
}

} // namespace nda
