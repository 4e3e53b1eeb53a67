#include "nda/experiments.hpp"

#include <cstring>

#include "nda/dots.hpp"
#include "nda/textures.hpp"

namespace nda {

std::vector<Image> dots_split(const DotsSpec &spec, std::uint64_t seed, Split split, std::size_t count) {
  Rng rng = Rng(seed).derive(split == Split::Train ? data_streams::kDotsTrain : data_streams::kDotsTest);
  return make_dots_dataset(spec, count, rng);
}

std::vector<Image> texture_split(std::uint64_t seed, Split split, std::size_t count, int size) {
  Rng rng = Rng(seed).derive(split == Split::Train ? data_streams::kTextureTrain : data_streams::kTextureTest);
  std::vector<Image> out;
  out.reserve(count);
  for (auto &s : make_texture_dataset(size, count, rng)) out.push_back(std::move(s.image));
  return out;
}

GanEvaluation evaluate_gan(const GanSnapshot &snapshot, int target, const std::vector<Image> &test,
                           const TransformSpec &nda, std::uint64_t seed, long n_samples) {
  Rng rng = Rng(seed).derive(data_streams::kGanEval);
  Rng sample_rng = rng.derive(1);
  Rng nda_rng = rng.derive(2);
  GanEvaluation ev;
  ev.target = target;
  ev.histogram = numerosity_histogram(snapshot, n_samples, sample_rng);
  ev.mass_at_target = mass_at(ev.histogram, target);
  ev.gap = logit_gap_report(snapshot.discriminator, test, nda, nda_rng);
  return ev;
}

Theorem1Instance theorem1_instance(std::uint64_t seed, std::size_t n, double lambda, const FGenerator &f) {
  std::uint64_t bits = 0;
  static_assert(sizeof bits == sizeof lambda);
  std::memcpy(&bits, &lambda, sizeof bits);
  const std::uint64_t cell = splitmix64(n) ^ splitmix64(bits) ^ splitmix64(0x100 + static_cast<std::uint64_t>(f.kind()));
  Rng rng = Rng(seed).derive(cell);
  MixtureProblem prob = random_disjoint_problem(n, lambda, f, rng);
  return {std::move(prob), rng};
}

SeparationReport evaluate_cpc(const Mlp &encoder, const std::vector<Image> &test, const TransformSpec &nda,
                              std::uint64_t seed) {
  Rng rng = Rng(seed).derive(data_streams::kCpcEval);
  return separation_report(encoder, test, nda, static_cast<int>(test.size()), rng);
}

} // namespace nda
