#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nda/image.hpp"
#include "nda/rng.hpp"

namespace nda {

enum class TransformKind { Jigsaw, Stitching, Cutout, Cutmix, Mixup, OtherClass };

std::string_view to_string(TransformKind kind);
/// Accepts "jigsaw", "stitching" (or "stitch"), "cutout", "cutmix", "mixup", "other-class".
TransformKind parse_transform_kind(std::string_view name);

/// Parameters of one NDA transform.
struct TransformSpec {
  TransformKind kind = TransformKind::Jigsaw;
  int k = 2;                         // jigsaw grid size
  double alpha = 2.0;                // mixup Beta(alpha, alpha) concentration
  double cut_patch_frac_min = 1.0 / 3.0;
  double cut_patch_frac_max = 0.5;
  bool zero_fill = false;            // cutout: zero the patch instead of the patch mean

  /// Throws ArgumentError when k < 2, alpha <= 0 or the patch fractions are out of order.
  void validate() const;
};

struct PatchRect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  bool contains(int y, int x) const noexcept {
    return y >= top && y < top + height && x >= left && x < left + width;
  }
  friend bool operator==(const PatchRect &, const PatchRect &) = default;
};

enum class StitchOrientation { Horizontal, Vertical };

/// What a transform drew, so the result can be replayed or recorded.
struct TransformMeta {
  std::optional<std::vector<int>> permutation;
  std::optional<double> gamma;
  std::optional<PatchRect> patch;
  std::optional<StitchOrientation> orientation;
  std::optional<std::size_t> pool_index;
};

struct Transformed {
  Image image;
  TransformMeta meta;
};

// Jigsaw: output tile slot i (row-major over the k x k grid) receives input
// tile permutation[i]. The random variant rejects the identity permutation.
Transformed jigsaw(const Image &img, int k, Rng &rng);
Image jigsaw_with_permutation(const Image &img, int k, std::span<const int> permutation);

// Stitching: horizontal puts the top half of a over the bottom half of b,
// vertical puts the left half of a beside the right half of b.
Transformed stitching(const Image &a, const Image &b, Rng &rng);
Image stitch(const Image &a, const Image &b, StitchOrientation orientation);

/// Patch geometry shared by cutout and cutmix. Draw order: height, width, top, left.
PatchRect draw_patch(int height, int width, const TransformSpec &spec, Rng &rng);

Transformed cutout(const Image &img, const TransformSpec &spec, Rng &rng);
Image cutout_at(const Image &img, const PatchRect &patch, bool zero_fill = false);

Transformed cutmix(const Image &img, const Image &donor, const TransformSpec &spec, Rng &rng);
Image cutmix_at(const Image &img, const Image &donor, const PatchRect &patch);

/// gamma ~ Beta(alpha, alpha) via the gamma-ratio method, then gamma*img + (1-gamma)*other,
/// evaluated as img + (1-gamma)(other-img) for gamma >= 1/2 and other + gamma(img-other) below.
Transformed mixup(const Image &img, const Image &other, double alpha, Rng &rng);
Image mixup_with_gamma(const Image &img, const Image &other, double gamma);

/// Uniform pick from a non-empty pool; the image comes back unmodified.
Transformed other_class_negative(std::span<const Image> pool, Rng &rng);

/// Dispatch on spec.kind. Two-image kinds require donor; OtherClass requires pool.
Transformed apply_transform(const TransformSpec &spec, const Image &img, const Image *donor,
                            std::span<const Image> pool, Rng &rng);

} // namespace nda
