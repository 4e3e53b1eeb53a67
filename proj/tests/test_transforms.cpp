#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>

#include "nda/error.hpp"
#include "nda/textures.hpp"
#include "nda/transforms.hpp"
#include "transform_invariants.hpp"

using namespace nda;
using nda::testing::random_image;

namespace {

std::vector<double> px(const Image &img) { return {img.pixels().begin(), img.pixels().end()}; }

TransformSpec spec_of(TransformKind kind) {
  TransformSpec s;
  s.kind = kind;
  return s;
}

} // namespace

TEST(Jigsaw, CyclicPermutationOfFourPixels) {
  // [[a,b],[c,d]] with slot i <- tile perm[i]; the 4-cycle {1,3,0,2} gives [[b,d],[a,c]].
  const Image img(2, 2, 1, {0.1, 0.2, 0.3, 0.4});
  const std::array<int, 4> perm = {1, 3, 0, 2};
  EXPECT_EQ(px(jigsaw_with_permutation(img, 2, perm)), (std::vector<double>{0.2, 0.4, 0.1, 0.3}));
}

TEST(Jigsaw, MultisetAndOracleProperty) {
  const auto r = nda::testing::check_jigsaw_multiset(1, 300);
  EXPECT_EQ(r.failures, 0) << r.first_failure;
}

TEST(Jigsaw, NeverIdentityOverManyDraws) {
  const Image img = Image::filled(2, 2, 1, 0.5);
  Rng rng(7);
  for (int i = 0; i < 100000; ++i) {
    const auto perm = *jigsaw(img, 2, rng).meta.permutation;
    ASSERT_FALSE(perm[0] == 0 && perm[1] == 1 && perm[2] == 2 && perm[3] == 3) << "draw " << i;
  }
}

TEST(Jigsaw, AllNonIdentityPermutationsAppearUniformly) {
  const Image img = Image::filled(2, 2, 1, 0.5);
  Rng rng(8);
  std::map<std::vector<int>, int> counts;
  const int n = 23000;
  for (int i = 0; i < n; ++i) ++counts[*jigsaw(img, 2, rng).meta.permutation];
  ASSERT_EQ(counts.size(), 23u);
  double chi2 = 0.0;
  for (const auto &[p, c] : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
  EXPECT_LT(chi2, 40.29);  // chi-square, 22 dof, p = 0.01
}

TEST(Jigsaw, Errors) {
  Rng rng(1);
  EXPECT_THROW(jigsaw(Image::filled(5, 4, 1, 0.0), 2, rng), DimensionError);
  EXPECT_THROW(jigsaw(Image::filled(4, 4, 1, 0.0), 1, rng), ArgumentError);
  const std::array<int, 4> bad = {0, 0, 1, 2};
  EXPECT_THROW(jigsaw_with_permutation(Image::filled(4, 4, 1, 0.0), 2, bad), ArgumentError);
}

TEST(Stitching, ZerosOverOnes) {
  const Image a = Image::filled(4, 6, 1, 0.0), b = Image::filled(4, 6, 1, 1.0);
  const Image out = stitch(a, b, StitchOrientation::Horizontal);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) EXPECT_EQ(out.at(y, x), y < 2 ? 0.0 : 1.0);
}

TEST(Stitching, SelfDonorIsIdentity) {
  Rng rng(3);
  const Image a = random_image(6, 8, 3, rng);
  EXPECT_EQ(stitch(a, a, StitchOrientation::Horizontal), a);
  EXPECT_EQ(stitch(a, a, StitchOrientation::Vertical), a);
}

TEST(Stitching, RegionProperty) {
  const auto r = nda::testing::check_stitching_regions(2, 300);
  EXPECT_EQ(r.failures, 0) << r.first_failure;
}

TEST(Stitching, Errors) {
  Rng rng(1);
  EXPECT_THROW(stitching(Image::filled(4, 4, 1, 0.0), Image::filled(4, 6, 1, 0.0), rng), DimensionError);
  EXPECT_THROW(stitching(Image::filled(3, 4, 1, 0.0), Image::filled(3, 4, 1, 0.0), rng), DimensionError);
}

TEST(Cutout, ConstantImageUnchanged) {
  Rng rng(4);
  const Image img = Image::filled(9, 9, 3, 0.3);
  EXPECT_EQ(cutout(img, spec_of(TransformKind::Cutout), rng).image, img);
}

TEST(Cutout, HandComputedPatchMean) {
  std::vector<double> v(36, 0.9);
  const double patch[6] = {0, 1, 0, 1, 0, 1};
  for (int i = 0; i < 6; ++i) v[static_cast<std::size_t>((i / 3) * 6 + i % 3)] = patch[i];
  const Image img(6, 6, 1, v);
  const Image out = cutout_at(img, PatchRect{0, 0, 2, 3});
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) EXPECT_EQ(out.at(y, x), (y < 2 && x < 3) ? 0.5 : 0.9);
}

TEST(Cutout, ZeroFillVariant) {
  const Image out = cutout_at(Image::filled(6, 6, 1, 0.7), PatchRect{1, 2, 2, 2}, true);
  EXPECT_EQ(out.at(1, 2), 0.0);
  EXPECT_EQ(out.at(0, 0), 0.7);
}

TEST(Cutout, LocalityProperty) {
  const auto r = nda::testing::check_cutout_locality(5, 300);
  EXPECT_EQ(r.failures, 0) << r.first_failure;
}

TEST(Cutout, TooSmallImage) {
  Rng rng(1);
  EXPECT_THROW(cutout(Image::filled(2, 5, 1, 0.0), spec_of(TransformKind::Cutout), rng), DimensionError);
}

TEST(Cutmix, SelfDonorIsIdentity) {
  Rng rng(6);
  const Image img = random_image(10, 7, 1, rng);
  EXPECT_EQ(cutmix(img, img, spec_of(TransformKind::Cutmix), rng).image, img);
}

TEST(Cutmix, AreaAccounting) {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const Transformed t =
        cutmix(Image::filled(12, 15, 3, 0.0), Image::filled(12, 15, 3, 1.0), spec_of(TransformKind::Cutmix), rng);
    double sum = 0.0;
    for (double v : t.image.pixels()) sum += v;
    EXPECT_EQ(sum, static_cast<double>(t.meta.patch->height * t.meta.patch->width * 3));
  }
}

TEST(Cutmix, LocalityProperty) {
  const auto r = nda::testing::check_cutmix_locality(9, 300);
  EXPECT_EQ(r.failures, 0) << r.first_failure;
}

TEST(Cutmix, ShapeMismatch) {
  Rng rng(1);
  EXPECT_THROW(cutmix(Image::filled(6, 6, 1, 0.0), Image::filled(6, 6, 3, 0.0), spec_of(TransformKind::Cutmix), rng),
               DimensionError);
}

TEST(Mixup, ForcedGammas) {
  const Image zeros = Image::filled(3, 3, 1, 0.0), ones = Image::filled(3, 3, 1, 1.0);
  EXPECT_EQ(mixup_with_gamma(zeros, ones, 0.5), Image::filled(3, 3, 1, 0.5));
  Rng rng(2);
  const Image x = random_image(3, 3, 1, rng), y = random_image(3, 3, 1, rng);
  EXPECT_EQ(mixup_with_gamma(x, y, 1.0), x);
}

TEST(Mixup, GammaMeanNearHalf) {
  Rng rng(10);
  const Image a = Image::filled(1, 1, 1, 0.0);
  double s = 0.0;
  for (int i = 0; i < 10000; ++i) s += *mixup(a, a, 2.0, rng).meta.gamma;
  EXPECT_NEAR(s / 10000.0, 0.5, 0.02);
}

TEST(Mixup, LinearityProperty) {
  const auto r = nda::testing::check_mixup_linearity(11, 300);
  EXPECT_EQ(r.failures, 0) << r.first_failure;
}

TEST(Mixup, Errors) {
  Rng rng(1);
  EXPECT_THROW(mixup(Image::filled(2, 2, 1, 0.0), Image::filled(2, 3, 1, 0.0), 2.0, rng), DimensionError);
  EXPECT_THROW(mixup(Image::filled(2, 2, 1, 0.0), Image::filled(2, 2, 1, 0.0), 0.0, rng), ArgumentError);
}

TEST(OtherClass, SingletonPool) {
  Rng rng(1);
  const std::vector<Image> pool = {random_image(4, 4, 1, rng)};
  EXPECT_EQ(other_class_negative(pool, rng).image, pool.front());
  EXPECT_THROW(other_class_negative(std::vector<Image>{}, rng), ArgumentError);
}

TEST(OtherClass, UniformDraws) {
  std::vector<Image> pool;
  for (int i = 0; i < 5; ++i) pool.push_back(Image::filled(1, 1, 1, i / 4.0));
  Rng rng(12);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 10000; ++i) ++counts[*other_class_negative(pool, rng).meta.pool_index];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
  EXPECT_LT(chi2, 13.28);  // 4 dof, p = 0.01
}

TEST(Transforms, DeterministicPerRngState) {
  Rng seed_rng(13);
  const Image img = random_image(8, 8, 3, seed_rng), donor = random_image(8, 8, 3, seed_rng);
  for (auto kind : {TransformKind::Jigsaw, TransformKind::Stitching, TransformKind::Cutout, TransformKind::Cutmix,
                    TransformKind::Mixup}) {
    Rng a(99), b(99);
    EXPECT_EQ(apply_transform(spec_of(kind), img, &donor, {}, a).image,
              apply_transform(spec_of(kind), img, &donor, {}, b).image);
  }
}

TEST(Transforms, ParseNames) {
  EXPECT_EQ(parse_transform_kind("jigsaw"), TransformKind::Jigsaw);
  EXPECT_EQ(parse_transform_kind("other-class"), TransformKind::OtherClass);
  EXPECT_EQ(to_string(TransformKind::Cutmix), "cutmix");
  EXPECT_THROW(parse_transform_kind("rotate"), ArgumentError);
}

TEST(Textures, ShapesAndAugmentation) {
  Rng rng(14);
  const auto data = make_texture_dataset(16, 10, rng);
  EXPECT_EQ(data[0].label, TextureClass::Stripes);
  EXPECT_EQ(data[1].label, TextureClass::Radial);
  for (const auto &s : data) {
    EXPECT_EQ(s.image.height(), 16);
    const Image v = random_crop_flip(s.image, rng);
    EXPECT_TRUE(v.same_shape(s.image));
  }
}
