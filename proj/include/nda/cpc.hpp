#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nda/autodiff.hpp"
#include "nda/image.hpp"
#include "nda/rng.hpp"
#include "nda/transforms.hpp"

namespace nda {

/// Which image an NDA negative is built from.
enum class NdaNegativeSource { Anchor, RandomBatchImage };

struct CpcConfig {
  int n = 64;                     // anchors per batch; each sees n - 1 in-batch negatives
  int m = 8;                      // NDA negatives per anchor
  double temperature = 0.07;
  int embed_dim = 8;
  std::vector<int> encoder_hidden = {256, 128};
  Activation encoder_activation = Activation::ReLU;
  long steps = 5000;
  std::uint64_t seed = 0;
  TransformSpec nda;              // default: jigsaw, k = 2
  NdaNegativeSource nda_source = NdaNegativeSource::Anchor;
  bool trainable_critic = false;  // bilinear critic exp(<a, W p> / tau), W initialized to I
  AdamConfig adam = {3e-3, 0.9, 0.999, 1e-8};
  long log_every = 100;
  int eval_size = 256;            // images in the fixed meanCosNda probe set

  void validate() const;
};

/// Unit-norm embeddings. nda holds m rows per anchor, anchor-major.
struct EmbeddingBatch {
  Matrix anchors;
  Matrix positives;
  Matrix nda;
  int m = 0;
  std::vector<int> provenance;    // dataset index of each anchor

  /// Throws DimensionError on inconsistent shapes, ArgumentError when a row is not unit-norm.
  void validate() const;
};

/// -mean log[ (n+m) g(a,p) / (g(a,p) + sum_j g(a, p_j) + sum_k g(a, z_k)) ] with
/// g(a, z) = exp(<a, z> / tau), recorded on the tape. m = 0 gives plain CPC.
/// `critic` (optional) inserts a bilinear map: <a W, z>.
Var contrastive_loss(Tape &tape, Var anchors, Var positives, std::optional<Var> nda, int m,
                     double temperature, std::optional<Var> critic = std::nullopt);

/// Plain CPC over a batch with m = 0 (ArgumentError otherwise).
double cpc_loss(const EmbeddingBatch &batch, double temperature);
/// NDA-CPC over a batch with m >= 1 (ArgumentError for m = 0: use cpc_loss).
double nda_cpc_loss(const EmbeddingBatch &batch, double temperature);

/// L2-normalized encoder output.
std::vector<double> encode(const Mlp &encoder, const Image &img);
/// Row-normalized encodings for a batch.
Matrix encode_batch(const Mlp &encoder, const std::vector<Image> &images);

struct CpcTraceRow {
  long step;
  double loss;
  double mean_cos_nda;
};

struct CpcResult {
  Mlp encoder;
  std::optional<Parameter> critic;
  std::vector<CpcTraceRow> trace;
};

namespace cpc_streams {
inline constexpr std::uint64_t kInit = 11;
inline constexpr std::uint64_t kData = 12;
inline constexpr std::uint64_t kAugment = 13;
inline constexpr std::uint64_t kNda = 14;
inline constexpr std::uint64_t kEval = 15;
} // namespace cpc_streams

Mlp init_encoder(const CpcConfig &cfg, int input_size);

/// Adam on cpc_loss (m = 0) or nda_cpc_loss (m > 0). Positive pairs are two
/// random_crop_flip views of the same image. The trace records the batch loss
/// and mean cos(x, nda(x)) over a fixed probe set every log_every steps.
/// Throws TrainingDivergenceError on a non-finite loss.
CpcResult train_cpc(const CpcConfig &cfg, const std::vector<Image> &data);

/// Mean cosine similarity between embeddings of images and of their transforms.
double mean_cosine(const Mlp &encoder, const std::vector<Image> &images,
                   const std::vector<Image> &transformed);

struct SeparationReport {
  double mean_distance = 0.0;  // mean of 1 - cos(h(x), h(nda(x)))
  double min_distance = 0.0;
  double probe_accuracy = 0.0; // held-out accuracy of a logistic probe, data vs NDA
  int samples = 0;
};

/// Uses the first n_samples images. A random half of the pairs trains the probe,
/// the rest test it.
SeparationReport separation_report(const Mlp &encoder, const std::vector<Image> &data,
                                   const TransformSpec &nda, int n_samples, Rng &rng);

/// Held-out accuracy of a logistic regression (with bias, class-balanced, small ridge
/// penalty, fit by Newton's method) separating positive from negative rows.
double logistic_probe_accuracy(const Matrix &train_pos, const Matrix &train_neg,
                               const Matrix &test_pos, const Matrix &test_neg, int iterations = 50,
                               double ridge = 1e-4);

std::string cpc_trace_csv(const std::vector<CpcTraceRow> &rows);

} // namespace nda
