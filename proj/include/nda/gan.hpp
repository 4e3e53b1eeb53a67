#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nda/autodiff.hpp"
#include "nda/dots.hpp"
#include "nda/image.hpp"
#include "nda/rng.hpp"
#include "nda/transforms.hpp"

namespace nda {

/// One family of negatives: either a transform of real images, or dots images
/// with other numerosities (the "other class" negatives for the dots data).
struct NdaSource {
  enum class Type { Transform, Numerosity };
  Type type = Type::Transform;
  TransformSpec transform;
  std::vector<int> dot_counts;

  static NdaSource of(TransformSpec spec) { return {Type::Transform, spec, {}}; }
  static NdaSource numerosity(std::vector<int> counts) {
    return {Type::Numerosity, TransformSpec{}, std::move(counts)};
  }
  std::string describe() const;
};

/// Parses "jigsaw", "cutout", ..., or "numerosity:4,5,7". Several sources may be
/// joined with '+'.
std::vector<NdaSource> parse_nda_sources(const std::string &text);

struct NdaGanConfig {
  double lambda = 0.25;
  std::vector<NdaSource> nda;
  int latent_dim = 16;
  int batch_size = 64;
  int d_steps = 4;              // discriminator updates per generator update
  long steps = 20000;           // discriminator updates; the generator moves every d_steps
  std::uint64_t seed = 0;
  std::vector<int> generator_hidden = {256, 512};
  std::vector<int> discriminator_hidden = {64, 32};
  AdamConfig adam = {2e-4, 0.5, 0.999, 1e-8};
  long log_every = 100;
  DotsSpec dots;                // geometry of numerosity negatives
  std::size_t negative_pool_size = 2048;

  /// Throws ConfigError for lambda outside (0, 1], non-positive sizes, or
  /// lambda < 1 with no NDA source.
  void validate() const;
  int generator_slots() const;  // round(lambda * batch)
  int nda_slots() const { return batch_size - generator_slots(); }
};

struct GanMetricsRow {
  long step;
  double d_loss;
  double g_loss;
  double mean_logit_real;
  double mean_logit_fake;
  double mean_logit_nda;  // NaN when the batch had no NDA samples
};

struct GanSnapshot {
  Mlp generator;
  Mlp discriminator;
  long step = 0;
  std::vector<GanMetricsRow> metrics;
};

/// Fake side of one discriminator batch.
struct NdaBatch {
  Matrix generated;                 // round(lambda B) rows, generator samples
  std::vector<Image> nda;           // B - round(lambda B) negatives
  std::vector<std::string> nda_kinds;
  int generator_count() const { return static_cast<int>(generated.rows()); }
  int nda_count() const { return static_cast<int>(nda.size()); }
};

/// Composes the fake batch: generator samples from z ~ N(0, I) drawn with
/// latent_rng, then NDA samples, each from a uniformly chosen source applied to
/// a uniformly chosen real image (a second one is drawn as donor when needed).
/// The real batch is not modified. Throws ConfigError if NDA slots exist but no
/// source is configured.
NdaBatch nda_batch(const std::vector<Image> &real_batch, const NdaGanConfig &cfg,
                   const std::vector<Image> &negative_pool, Rng &nda_rng, Rng &latent_rng,
                   const Mlp &generator);

/// Discriminator objective: the negated JS variational bound with
/// T(x) = ln 2 - softplus(-D(x)), i.e. mean softplus(-D(real)) + mean softplus(D(fake)) - 2 ln 2.
Var discriminator_loss(Tape &tape, Var real_logits, Var fake_logits);
/// Non-saturating generator objective: mean softplus(-D(G(z))).
Var generator_loss(Tape &tape, Var fake_logits);

Matrix images_to_matrix(const std::vector<Image> &images);
std::vector<Image> matrix_to_images(const Matrix &rows, int height, int width);
Matrix sample_latent(int count, int latent_dim, Rng &rng);

/// Networks for cfg with parameters drawn from the init substream of cfg.seed.
GanSnapshot init_gan(const NdaGanConfig &cfg, int image_size);

/// Alternating updates over a fixed dataset. The generator only sees its own
/// samples; NDA samples enter the discriminator's fake pool alone. Deterministic
/// per cfg.seed. Throws TrainingDivergenceError on a non-finite loss.
/// observer, if set, sees the snapshot after every logged step.
using GanObserver = std::function<void(const GanSnapshot &)>;
GanSnapshot train_nda_gan(const NdaGanConfig &cfg, const std::vector<Image> &data,
                          const GanObserver &observer = {});

/// Substream ids derived from the run seed.
namespace gan_streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kData = 2;
inline constexpr std::uint64_t kLatent = 3;
inline constexpr std::uint64_t kNda = 4;
inline constexpr std::uint64_t kNegativePool = 5;
} // namespace gan_streams

/// nSamples generated images, each counted with count_components(img, 0.5, 3).
std::map<long, long> numerosity_histogram(const GanSnapshot &snapshot, long n_samples, Rng &rng);
double mass_at(const std::map<long, long> &histogram, long count);

/// Pre-sigmoid discriminator logit for one image.
double anomaly_score(const Mlp &discriminator, const Image &img);

struct LogitGapReport {
  std::vector<double> gaps;   // D(x) - D(jigsaw(x)) per test image
  double mean_gap = 0.0;
  double auroc = 0.0;         // clean = positive, jigsawed = negative
};

LogitGapReport logit_gap_report(const Mlp &discriminator, const std::vector<Image> &test,
                                const TransformSpec &nda, Rng &rng);

/// Flat snapshot: "NDASNAP1", little-endian u64 header length, JSON header,
/// then every parameter as little-endian float64 in header order.
void save_snapshot(const GanSnapshot &snapshot, const std::filesystem::path &path,
                   const std::string &extra_header_json = "{}");
GanSnapshot load_snapshot(const std::filesystem::path &path);

std::vector<std::uint8_t> encode_networks(const std::vector<std::pair<std::string, const Mlp *>> &nets,
                                          long step, const std::string &extra_header_json);
std::vector<std::pair<std::string, Mlp>> decode_networks(const std::vector<std::uint8_t> &bytes,
                                                         long *step);

std::string metrics_csv(const std::vector<GanMetricsRow> &rows);
std::string histogram_csv(const std::map<long, long> &histogram);

} // namespace nda
