#include "nda/cpc.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "nda/error.hpp"
#include "nda/gan.hpp"
#include "nda/textures.hpp"

namespace nda {

void CpcConfig::validate() const {
  if (n < 2) throw ConfigError("n must be at least 2");
  if (m < 0) throw ConfigError("m must be non-negative");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be positive");
  if (embed_dim <= 0) throw ConfigError("embedding dimension must be positive");
  for (int h : encoder_hidden) {
    if (h <= 0) throw ConfigError("encoder hidden sizes must be positive");
  }
  if (steps < 0 || log_every <= 0 || eval_size <= 0) {
    throw ConfigError("steps must be non-negative, log interval and eval size positive");
  }
  if (m > 0) nda.validate();
}

namespace {

void check_unit_rows(const Matrix &x, const char *what) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (std::abs(x.row(i).norm() - 1.0) > 1e-9) {
      throw ArgumentError(std::string(what) + " row " + std::to_string(i) + " is not unit-norm");
    }
  }
}

} // namespace

void EmbeddingBatch::validate() const {
  if (anchors.rows() < 2) throw DimensionError("batch needs at least two anchors");
  if (positives.rows() != anchors.rows() || positives.cols() != anchors.cols()) {
    throw DimensionError("anchors and positives differ in shape");
  }
  if (m < 0) throw ArgumentError("m must be non-negative");
  if (nda.rows() != anchors.rows() * m || (m > 0 && nda.cols() != anchors.cols())) {
    throw DimensionError("expected n*m NDA rows of the embedding width");
  }
  if (!provenance.empty() && static_cast<Eigen::Index>(provenance.size()) != anchors.rows()) {
    throw DimensionError("provenance length differs from anchor count");
  }
  check_unit_rows(anchors, "anchor");
  check_unit_rows(positives, "positive");
  check_unit_rows(nda, "NDA");
}

Var contrastive_loss(Tape &tape, Var anchors, Var positives, std::optional<Var> nda, int m,
                     double temperature, std::optional<Var> critic) {
  const auto n = tape.value(anchors).rows();
  if (n < 2) throw DimensionError("contrastive loss needs at least two anchors");
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be positive");
  Var a = critic ? tape.matmul(anchors, *critic) : anchors;
  Var logits = tape.scale(tape.matmul_nt(a, positives), 1.0 / temperature);
  if (m > 0) {
    if (!nda) throw ArgumentError("m > 0 without NDA embeddings");
    logits = tape.concat_cols(logits, tape.scale(tape.group_dot(a, *nda, m), 1.0 / temperature));
  }
  return tape.shift(tape.diag_cross_entropy(logits), -std::log(static_cast<double>(n + m)));
}

double cpc_loss(const EmbeddingBatch &batch, double temperature) {
  if (batch.m != 0) throw ArgumentError("cpc_loss takes m = 0; use nda_cpc_loss");
  batch.validate();
  Tape tape;
  return tape.scalar_value(contrastive_loss(tape, tape.input(batch.anchors), tape.input(batch.positives),
                                            std::nullopt, 0, temperature));
}

double nda_cpc_loss(const EmbeddingBatch &batch, double temperature) {
  if (batch.m < 1) throw ArgumentError("nda_cpc_loss needs m >= 1; use cpc_loss");
  batch.validate();
  Tape tape;
  return tape.scalar_value(contrastive_loss(tape, tape.input(batch.anchors), tape.input(batch.positives),
                                            tape.input(batch.nda), batch.m, temperature));
}

namespace {

Matrix normalized_rows(Matrix x) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double norm = x.row(i).norm();
    if (norm > 0.0) x.row(i) /= norm;
  }
  return x;
}

} // namespace

std::vector<double> encode(const Mlp &encoder, const Image &img) {
  if (static_cast<int>(img.size()) != encoder.input_size()) {
    throw DimensionError("image has " + std::to_string(img.size()) + " values, encoder expects " +
                         std::to_string(encoder.input_size()));
  }
  const Matrix e = normalized_rows(encoder.predict(images_to_matrix({img})));
  return {e.data(), e.data() + e.size()};
}

Matrix encode_batch(const Mlp &encoder, const std::vector<Image> &images) {
  if (images.empty()) return Matrix(0, encoder.output_size());
  const Matrix x = images_to_matrix(images);
  if (x.cols() != encoder.input_size()) throw DimensionError("image size does not match the encoder");
  return normalized_rows(encoder.predict(x));
}

double mean_cosine(const Mlp &encoder, const std::vector<Image> &images,
                   const std::vector<Image> &transformed) {
  if (images.size() != transformed.size() || images.empty()) {
    throw DimensionError("need equally many non-zero originals and transforms");
  }
  const Matrix a = encode_batch(encoder, images);
  const Matrix b = encode_batch(encoder, transformed);
  return a.cwiseProduct(b).rowwise().sum().mean();
}

Mlp init_encoder(const CpcConfig &cfg, int input_size) {
  MlpSpec spec;
  spec.layer_sizes.push_back(input_size);
  for (int h : cfg.encoder_hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(cfg.embed_dim);
  spec.hidden = cfg.encoder_activation;
  spec.output = Activation::Identity;
  Rng rng = Rng(cfg.seed).derive(cpc_streams::kInit);
  return Mlp::init(std::move(spec), rng, "encoder");
}

namespace {

Image nda_of(const TransformSpec &spec, const Image &img, const std::vector<Image> &data, Rng &rng) {
  const Image &donor = data[rng.below(static_cast<std::uint32_t>(data.size()))];
  return apply_transform(spec, img, &donor, data, rng).image;
}

// n distinct indices by a partial Fisher-Yates shuffle.
std::vector<int> draw_indices(std::vector<int> &scratch, int n, Rng &rng) {
  const auto size = static_cast<std::uint32_t>(scratch.size());
  for (int i = 0; i < n; ++i) {
    const auto j = static_cast<std::uint32_t>(i) + rng.below(size - static_cast<std::uint32_t>(i));
    std::swap(scratch[static_cast<std::size_t>(i)], scratch[j]);
  }
  return {scratch.begin(), scratch.begin() + n};
}

} // namespace

CpcResult train_cpc(const CpcConfig &cfg, const std::vector<Image> &data) {
  cfg.validate();
  if (data.size() < static_cast<std::size_t>(cfg.n)) throw ArgumentError("dataset smaller than n");
  const int input_size = static_cast<int>(data.front().size());

  CpcResult result{init_encoder(cfg, input_size), std::nullopt, {}};
  Mlp &encoder = result.encoder;
  std::vector<Parameter *> params = encoder.parameters();
  if (cfg.trainable_critic) {
    result.critic = Parameter("critic.W", Matrix::Identity(cfg.embed_dim, cfg.embed_dim));
    params.push_back(&*result.critic);
  }
  Adam adam(params, cfg.adam);

  Rng data_rng = Rng(cfg.seed).derive(cpc_streams::kData);
  Rng aug_rng = Rng(cfg.seed).derive(cpc_streams::kAugment);
  Rng nda_rng = Rng(cfg.seed).derive(cpc_streams::kNda);
  Rng eval_rng = Rng(cfg.seed).derive(cpc_streams::kEval);

  // Fixed probe set for the meanCosNda trace column.
  const auto eval_count = std::min<std::size_t>(static_cast<std::size_t>(cfg.eval_size), data.size());
  std::vector<Image> eval_x(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(eval_count));
  std::vector<Image> eval_t;
  eval_t.reserve(eval_count);
  for (const auto &img : eval_x) eval_t.push_back(nda_of(cfg.nda, img, data, eval_rng));

  std::vector<int> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  Tape tape;
  double loss = 0.0;
  for (long step = 1; step <= cfg.steps; ++step) {
    const auto idx = draw_indices(order, cfg.n, data_rng);
    std::vector<Image> anchors, positives, negatives;
    anchors.reserve(idx.size());
    positives.reserve(idx.size());
    negatives.reserve(idx.size() * static_cast<std::size_t>(cfg.m));
    for (int i : idx) {
      const Image &x = data[static_cast<std::size_t>(i)];
      anchors.push_back(random_crop_flip(x, aug_rng));
      positives.push_back(random_crop_flip(x, aug_rng));
      for (int k = 0; k < cfg.m; ++k) {
        const Image &src = cfg.nda_source == NdaNegativeSource::Anchor
                               ? x
                               : data[nda_rng.below(static_cast<std::uint32_t>(data.size()))];
        negatives.push_back(nda_of(cfg.nda, src, data, nda_rng));
      }
    }

    tape.reset();
    adam.zero_grad();
    auto embed = [&](const std::vector<Image> &imgs) {
      return tape.normalize_rows(encoder.forward(tape, tape.input(images_to_matrix(imgs))));
    };
    const Var a = embed(anchors);
    const Var p = embed(positives);
    std::optional<Var> z;
    if (cfg.m > 0) z = embed(negatives);
    std::optional<Var> critic;
    if (result.critic) critic = tape.parameter(*result.critic);
    const Var l = contrastive_loss(tape, a, p, z, cfg.m, cfg.temperature, critic);
    loss = tape.scalar_value(l);
    if (!std::isfinite(loss)) throw TrainingDivergenceError(step, "contrastive loss is not finite");
    tape.backward(l);
    adam.step();

    if (step % cfg.log_every == 0 || step == cfg.steps) {
      result.trace.push_back({step, loss, mean_cosine(encoder, eval_x, eval_t)});
    }
  }
  return result;
}

double logistic_probe_accuracy(const Matrix &train_pos, const Matrix &train_neg, const Matrix &test_pos,
                               const Matrix &test_neg, int iterations, double ridge) {
  const auto d = train_pos.cols();
  if (train_neg.cols() != d || test_pos.cols() != d || test_neg.cols() != d) {
    throw DimensionError("probe inputs differ in width");
  }
  if (train_pos.rows() == 0 || train_neg.rows() == 0 || test_pos.rows() + test_neg.rows() == 0) {
    throw ArgumentError("probe needs examples of both classes");
  }
  // Design matrix with a trailing bias column.
  Matrix x(train_pos.rows() + train_neg.rows(), d + 1);
  x.topLeftCorner(train_pos.rows(), d) = train_pos;
  x.bottomLeftCorner(train_neg.rows(), d) = train_neg;
  x.col(d).setOnes();
  Eigen::VectorXd y(x.rows());
  y.head(train_pos.rows()).setOnes();
  y.tail(train_neg.rows()).setZero();
  // Class-balanced weights so an uninformative probe sits exactly at p = 1/2.
  Eigen::VectorXd weight(x.rows());
  weight.head(train_pos.rows()).setConstant(0.5 / static_cast<double>(train_pos.rows()));
  weight.tail(train_neg.rows()).setConstant(0.5 / static_cast<double>(train_neg.rows()));

  // Newton iterations on the weighted, ridge-penalized logistic loss.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd p = (x * w).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    Eigen::VectorXd g = x.transpose() * (p - y).cwiseProduct(weight) + ridge * w;
    if (g.lpNorm<Eigen::Infinity>() < 1e-12) break;
    const Eigen::VectorXd h = weight.cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix()));
    Eigen::MatrixXd hess = x.transpose() * h.asDiagonal() * x;
    hess.diagonal().array() += ridge;
    w -= hess.ldlt().solve(g);
  }
  const Eigen::VectorXd coef = w.head(d);
  const double bias = w(d);
  long correct = 0;
  for (Eigen::Index i = 0; i < test_pos.rows(); ++i) correct += test_pos.row(i).dot(coef) + bias >= 0.0;
  for (Eigen::Index i = 0; i < test_neg.rows(); ++i) correct += test_neg.row(i).dot(coef) + bias < 0.0;
  return static_cast<double>(correct) / static_cast<double>(test_pos.rows() + test_neg.rows());
}

SeparationReport separation_report(const Mlp &encoder, const std::vector<Image> &data,
                                   const TransformSpec &nda, int n_samples, Rng &rng) {
  if (n_samples < 2 || static_cast<std::size_t>(n_samples) > data.size()) {
    throw ArgumentError("n_samples must lie in [2, dataset size]");
  }
  nda.validate();
  std::vector<Image> xs(data.begin(), data.begin() + n_samples);
  std::vector<Image> ts;
  ts.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Image &donor = xs[(i + 1) % xs.size()];
    ts.push_back(apply_transform(nda, xs[i], &donor, data, rng).image);
  }
  const Matrix e = encode_batch(encoder, xs);
  const Matrix f = encode_batch(encoder, ts);

  SeparationReport rep;
  rep.samples = n_samples;
  const Eigen::VectorXd dist = 1.0 - e.cwiseProduct(f).rowwise().sum().array();
  rep.mean_distance = dist.mean();
  rep.min_distance = std::max(0.0, dist.minCoeff());

  // Random half split of the pairs: dataset order may carry structure (class alternation).
  const auto order = random_permutation(rng, n_samples);
  const auto half_train = (n_samples + 1) / 2;
  const auto half_test = n_samples / 2;
  Matrix tr_pos(half_train, e.cols()), tr_neg(half_train, e.cols());
  Matrix te_pos(half_test, e.cols()), te_neg(half_test, e.cols());
  for (int r = 0; r < n_samples; ++r) {
    const auto i = static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)]);
    if (r < half_train) {
      tr_pos.row(r) = e.row(i);
      tr_neg.row(r) = f.row(i);
    } else {
      te_pos.row(r - half_train) = e.row(i);
      te_neg.row(r - half_train) = f.row(i);
    }
  }
  rep.probe_accuracy = logistic_probe_accuracy(tr_pos, tr_neg, te_pos, te_neg);
  return rep;
}

std::string cpc_trace_csv(const std::vector<CpcTraceRow> &rows) {
  std::ostringstream os;
  os << std::setprecision(17) << "step,loss,meanCosNda\n";
  for (const auto &r : rows) os << r.step << ',' << r.loss << ',' << r.mean_cos_nda << '\n';
  return os.str();
}

} // namespace nda
