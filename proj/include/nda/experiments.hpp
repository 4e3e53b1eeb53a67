#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "nda/cpc.hpp"
#include "nda/divergence.hpp"
#include "nda/gan.hpp"
#include "nda/image.hpp"

namespace nda {

// Shared by the CLI and the acceptance runs so both see the same data for a seed.
namespace data_streams {
inline constexpr std::uint64_t kDotsTrain = 100;
inline constexpr std::uint64_t kDotsTest = 200;
inline constexpr std::uint64_t kTextureTrain = 300;
inline constexpr std::uint64_t kTextureTest = 301;
inline constexpr std::uint64_t kGanEval = 400;
inline constexpr std::uint64_t kCpcEval = 401;
} // namespace data_streams

inline constexpr std::size_t kDotsTrainSize = 8192;
inline constexpr std::size_t kDotsTestSize = 500;
inline constexpr std::size_t kTextureTrainSize = 4096;
inline constexpr std::size_t kTextureTestSize = 1000;
inline constexpr int kTextureSize = 16;

enum class Split { Train, Test };

std::vector<Image> dots_split(const DotsSpec &spec, std::uint64_t seed, Split split, std::size_t count);
std::vector<Image> texture_split(std::uint64_t seed, Split split, std::size_t count, int size = kTextureSize);

struct GanEvaluation {
  int target = 0;
  std::map<long, long> histogram;
  double mass_at_target = 0.0;
  LogitGapReport gap;          // D(x) - D(nda(x)) over the test images
};

/// Histogram of n_samples generated images and the logit-gap report for `nda`,
/// with randomness drawn from the evaluation substream of seed.
GanEvaluation evaluate_gan(const GanSnapshot &snapshot, int target, const std::vector<Image> &test,
                           const TransformSpec &nda, std::uint64_t seed, long n_samples = 1000);

/// Disjoint mixture instance for one (seed, N, lambda, f) cell of the Theorem 1
/// grid; rng is left positioned for the lower-bound probes.
struct Theorem1Instance {
  MixtureProblem problem;
  Rng rng;
};
Theorem1Instance theorem1_instance(std::uint64_t seed, std::size_t n, double lambda, const FGenerator &f);

SeparationReport evaluate_cpc(const Mlp &encoder, const std::vector<Image> &test, const TransformSpec &nda,
                              std::uint64_t seed);

} // namespace nda
