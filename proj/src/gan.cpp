#include "nda/gan.hpp"

#include <bit>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "nda/error.hpp"
#include "nda/io.hpp"
#include "nda/metrics.hpp"

namespace nda {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string activation_name(Activation a) {
  switch (a) {
  case Activation::Identity: return "identity";
  case Activation::ReLU: return "relu";
  case Activation::Tanh: return "tanh";
  case Activation::LeakyReLU: return "leaky_relu";
  case Activation::Sigmoid: return "sigmoid";
  case Activation::ScaledTanh: return "scaled_tanh";
  }
  return "identity";
}

Activation parse_activation(const std::string &s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "leaky_relu") return Activation::LeakyReLU;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "scaled_tanh") return Activation::ScaledTanh;
  throw FormatError("snapshot: unknown activation '" + s + "'");
}

std::vector<int> layer_sizes(int in, const std::vector<int> &hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

double row_mean(const Matrix &m, Eigen::Index begin, Eigen::Index count) {
  if (count <= 0) return kNaN;
  return m.col(0).segment(begin, count).mean();
}

void put_u64(std::vector<std::uint8_t> &out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::vector<std::uint8_t> &in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[pos + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

} // namespace

std::string NdaSource::describe() const {
  if (type == Type::Transform) return std::string(to_string(transform.kind));
  std::string s = "numerosity:";
  for (std::size_t i = 0; i < dot_counts.size(); ++i) s += (i ? "," : "") + std::to_string(dot_counts[i]);
  return s;
}

std::vector<NdaSource> parse_nda_sources(const std::string &text) {
  std::vector<NdaSource> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, '+')) {
    if (item.empty()) continue;
    if (item.rfind("numerosity:", 0) == 0) {
      std::vector<int> counts;
      std::stringstream cs(item.substr(11));
      std::string c;
      while (std::getline(cs, c, ',')) {
        try {
          counts.push_back(std::stoi(c));
        } catch (const std::exception &) {
          throw ArgumentError("bad dot count '" + c + "' in '" + item + "'");
        }
      }
      if (counts.empty()) throw ArgumentError("numerosity source needs at least one count");
      out.push_back(NdaSource::numerosity(std::move(counts)));
    } else {
      TransformSpec spec;
      spec.kind = parse_transform_kind(item);
      if (spec.kind == TransformKind::OtherClass) {
        throw ArgumentError("use numerosity:<counts> for other-class negatives");
      }
      out.push_back(NdaSource::of(spec));
    }
  }
  return out;
}

void NdaGanConfig::validate() const {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1]");
  if (latent_dim <= 0 || batch_size <= 0 || d_steps <= 0 || steps < 0 || log_every <= 0) {
    throw ConfigError("latent dim, batch size, d-steps and log interval must be positive");
  }
  if (log_every % d_steps != 0) throw ConfigError("log interval must be a multiple of d-steps");
  if (generator_slots() < 1) throw ConfigError("round(lambda * batch) must leave at least one generator sample");
  if (nda_slots() > 0 && nda.empty()) throw ConfigError("lambda < 1 needs at least one NDA source");
  for (const auto &src : nda) {
    if (src.type == NdaSource::Type::Transform) src.transform.validate();
    if (src.type == NdaSource::Type::Numerosity && src.dot_counts.empty()) {
      throw ConfigError("numerosity source without counts");
    }
  }
}

int NdaGanConfig::generator_slots() const {
  return static_cast<int>(std::lround(lambda * static_cast<double>(batch_size)));
}

Matrix images_to_matrix(const std::vector<Image> &images) {
  if (images.empty()) return Matrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(images.front().size());
  Matrix m(static_cast<Eigen::Index>(images.size()), cols);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (static_cast<Eigen::Index>(images[i].size()) != cols) throw DimensionError("images differ in size");
    const auto px = images[i].pixels();
    m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(px.data(), cols);
  }
  return m;
}

std::vector<Image> matrix_to_images(const Matrix &rows, int height, int width) {
  if (rows.cols() != static_cast<Eigen::Index>(height) * width) throw DimensionError("row width is not H*W");
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    std::vector<double> px(rows.row(i).data(), rows.row(i).data() + rows.cols());
    out.push_back(image_from_clamped(height, width, 1, std::move(px)));
  }
  return out;
}

Matrix sample_latent(int count, int latent_dim, Rng &rng) {
  Matrix z(count, latent_dim);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
  return z;
}

NdaBatch nda_batch(const std::vector<Image> &real_batch, const NdaGanConfig &cfg,
                   const std::vector<Image> &negative_pool, Rng &nda_rng, Rng &latent_rng,
                   const Mlp &generator) {
  if (real_batch.empty()) throw ArgumentError("nda_batch: empty real batch");
  const int n_gen = cfg.generator_slots();
  const int n_nda = cfg.batch_size - n_gen;
  if (n_nda > 0 && cfg.nda.empty()) throw ConfigError("nda_batch: NDA slots but no NDA source configured");
  NdaBatch batch;
  batch.generated = generator.predict(sample_latent(n_gen, cfg.latent_dim, latent_rng));
  batch.nda.reserve(static_cast<std::size_t>(n_nda));
  const auto n_real = static_cast<std::uint32_t>(real_batch.size());
  for (int i = 0; i < n_nda; ++i) {
    const auto &src = cfg.nda[nda_rng.below(static_cast<std::uint32_t>(cfg.nda.size()))];
    if (src.type == NdaSource::Type::Numerosity) {
      batch.nda.push_back(other_class_negative(negative_pool, nda_rng).image);
    } else {
      const auto &img = real_batch[nda_rng.below(n_real)];
      const auto kind = src.transform.kind;
      const bool two_image = kind == TransformKind::Stitching || kind == TransformKind::Cutmix ||
                             kind == TransformKind::Mixup;
      const Image *donor = two_image ? &real_batch[nda_rng.below(n_real)] : nullptr;
      batch.nda.push_back(apply_transform(src.transform, img, donor, {}, nda_rng).image);
    }
    batch.nda_kinds.push_back(src.describe());
  }
  return batch;
}

Var discriminator_loss(Tape &tape, Var real_logits, Var fake_logits) {
  const Var real_term = tape.mean(tape.softplus(tape.scale(real_logits, -1.0)));
  const Var fake_term = tape.mean(tape.softplus(fake_logits));
  return tape.shift(tape.add(real_term, fake_term), -2.0 * std::numbers::ln2);
}

Var generator_loss(Tape &tape, Var fake_logits) {
  return tape.mean(tape.softplus(tape.scale(fake_logits, -1.0)));
}

GanSnapshot init_gan(const NdaGanConfig &cfg, int image_size) {
  Rng init = Rng(cfg.seed).derive(gan_streams::kInit);
  const int pixels = image_size * image_size;
  MlpSpec gspec{layer_sizes(cfg.latent_dim, cfg.generator_hidden, pixels), Activation::ReLU,
                Activation::ScaledTanh, 0.2};
  MlpSpec dspec{layer_sizes(pixels, cfg.discriminator_hidden, 1), Activation::LeakyReLU,
                Activation::Identity, 0.2};
  Mlp g = Mlp::init(gspec, init, "generator");
  Mlp d = Mlp::init(dspec, init, "discriminator");
  return GanSnapshot{std::move(g), std::move(d), 0, {}};
}

GanSnapshot train_nda_gan(const NdaGanConfig &cfg, const std::vector<Image> &data,
                          const GanObserver &observer) {
  cfg.validate();
  if (data.size() < static_cast<std::size_t>(10 * cfg.batch_size)) {
    throw ArgumentError("training set needs at least 10 * batch size images");
  }
  const Image &first = data.front();
  if (first.channels() != 1 || first.height() != first.width()) {
    throw DimensionError("GAN trainer expects square grayscale images");
  }
  const int size = first.height();
  GanSnapshot snap = init_gan(cfg, size);
  Mlp &gen = snap.generator;
  Mlp &disc = snap.discriminator;

  const Rng root(cfg.seed);
  Rng data_rng = root.derive(gan_streams::kData);
  Rng latent_rng = root.derive(gan_streams::kLatent);
  Rng nda_rng = root.derive(gan_streams::kNda);

  std::vector<Image> pool;
  for (const auto &src : cfg.nda) {
    if (src.type != NdaSource::Type::Numerosity || cfg.nda_slots() == 0) continue;
    Rng pool_rng = root.derive(gan_streams::kNegativePool);
    DotsSpec ds = cfg.dots;
    ds.image_size = size;
    for (std::size_t i = 0; i < cfg.negative_pool_size; ++i) {
      ds.dot_count = src.dot_counts[i % src.dot_counts.size()];
      pool.push_back(make_dots_image(ds, pool_rng));
    }
  }

  const Matrix data_matrix = images_to_matrix(data);
  const auto n_data = static_cast<std::uint32_t>(data.size());
  const int batch = cfg.batch_size;
  const int n_gen = cfg.generator_slots();
  const bool has_nda = cfg.nda_slots() > 0;

  Adam d_opt(disc.parameters(), cfg.adam);
  Adam g_opt(gen.parameters(), cfg.adam);
  Tape tape;
  double last_g_loss = kNaN;
  std::vector<Image> real_images;
  Matrix real(batch, data_matrix.cols());

  for (long step = 1; step <= cfg.steps; ++step) {
    real_images.clear();
    for (int i = 0; i < batch; ++i) {
      const auto idx = data_rng.below(n_data);
      real.row(i) = data_matrix.row(idx);
      if (has_nda) real_images.push_back(data[idx]);
    }
    NdaBatch fake = nda_batch(has_nda ? real_images : std::vector<Image>{data.front()}, cfg, pool,
                              nda_rng, latent_rng, gen);
    Matrix fake_matrix(batch, data_matrix.cols());
    fake_matrix.topRows(n_gen) = fake.generated;
    if (has_nda) fake_matrix.bottomRows(batch - n_gen) = images_to_matrix(fake.nda);

    tape.reset();
    const Var real_logits = disc.forward(tape, tape.input(real));
    const Var fake_logits = disc.forward(tape, tape.input(std::move(fake_matrix)));
    const Var d_loss = discriminator_loss(tape, real_logits, fake_logits);
    const double d_loss_value = tape.scalar_value(d_loss);
    if (!std::isfinite(d_loss_value)) {
      throw TrainingDivergenceError(step, "discriminator loss is not finite at step " + std::to_string(step));
    }
    const Matrix real_out = tape.value(real_logits);
    const Matrix fake_out = tape.value(fake_logits);
    disc.zero_grad();
    tape.backward(d_loss);
    d_opt.step();

    if (step % cfg.d_steps == 0) {
      tape.reset();
      const Var z = tape.input(sample_latent(batch, cfg.latent_dim, latent_rng));
      const Var logits = disc.forward(tape, gen.forward(tape, z), /*trainable=*/false);
      const Var g_loss = generator_loss(tape, logits);
      last_g_loss = tape.scalar_value(g_loss);
      if (!std::isfinite(last_g_loss)) {
        throw TrainingDivergenceError(step, "generator loss is not finite at step " + std::to_string(step));
      }
      gen.zero_grad();
      tape.backward(g_loss);
      g_opt.step();
    }

    if (step % cfg.log_every == 0 || step == cfg.steps) {
      snap.metrics.push_back({step, d_loss_value, last_g_loss, real_out.mean(),
                              row_mean(fake_out, 0, n_gen), row_mean(fake_out, n_gen, batch - n_gen)});
      if (observer) {
        snap.step = step;
        observer(snap);
      }
    }
  }
  snap.step = cfg.steps;
  return snap;
}

std::map<long, long> numerosity_histogram(const GanSnapshot &snapshot, long n_samples, Rng &rng) {
  std::map<long, long> hist;
  const int latent = snapshot.generator.input_size();
  const int pixels = snapshot.generator.output_size();
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(pixels))));
  if (side * side != pixels) throw DimensionError("generator output is not a square image");
  constexpr long kChunk = 256;
  for (long done = 0; done < n_samples; done += kChunk) {
    const int count = static_cast<int>(std::min(kChunk, n_samples - done));
    const Matrix out = snapshot.generator.predict(sample_latent(count, latent, rng));
    for (const auto &img : matrix_to_images(out, side, side)) ++hist[count_components(img, 0.5, 3)];
  }
  return hist;
}

double mass_at(const std::map<long, long> &histogram, long count) {
  long total = 0;
  for (const auto &[k, v] : histogram) total += v;
  if (total == 0) return 0.0;
  const auto it = histogram.find(count);
  return it == histogram.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

double anomaly_score(const Mlp &discriminator, const Image &img) {
  if (static_cast<int>(img.size()) != discriminator.input_size()) {
    throw DimensionError("anomaly_score: image has " + std::to_string(img.size()) +
                         " values, discriminator expects " + std::to_string(discriminator.input_size()));
  }
  const Matrix x = Eigen::Map<const Matrix>(img.pixels().data(), 1, static_cast<Eigen::Index>(img.size()));
  return discriminator.predict(x)(0, 0);
}

LogitGapReport logit_gap_report(const Mlp &discriminator, const std::vector<Image> &test,
                                const TransformSpec &nda, Rng &rng) {
  if (test.empty()) throw ArgumentError("logit gap: empty test set");
  std::vector<Image> transformed;
  transformed.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Image &donor = test[(i + 1) % test.size()];
    transformed.push_back(apply_transform(nda, test[i], &donor, {}, rng).image);
  }
  const Matrix clean = discriminator.predict(images_to_matrix(test));
  const Matrix corrupt = discriminator.predict(images_to_matrix(transformed));
  LogitGapReport report;
  std::vector<double> pos, neg;
  for (Eigen::Index i = 0; i < clean.rows(); ++i) {
    report.gaps.push_back(clean(i, 0) - corrupt(i, 0));
    pos.push_back(clean(i, 0));
    neg.push_back(corrupt(i, 0));
  }
  report.mean_gap = mean(report.gaps);
  report.auroc = auroc(pos, neg);
  return report;
}

std::vector<std::uint8_t> encode_networks(const std::vector<std::pair<std::string, const Mlp *>> &nets,
                                          long step, const std::string &extra_header_json) {
  nlohmann::ordered_json header;
  header["format"] = "nda-snapshot";
  header["version"] = 1;
  header["step"] = step;
  header["byteOrder"] = "little";
  header["networks"] = nlohmann::ordered_json::array();
  for (const auto &[name, mlp] : nets) {
    nlohmann::ordered_json net;
    net["name"] = name;
    net["layerSizes"] = mlp->spec().layer_sizes;
    net["hidden"] = activation_name(mlp->spec().hidden);
    net["output"] = activation_name(mlp->spec().output);
    net["leakySlope"] = mlp->spec().leaky_slope;
    net["parameters"] = mlp->parameter_count();
    header["networks"].push_back(net);
  }
  header["extra"] = nlohmann::ordered_json::parse(extra_header_json);
  const std::string text = header.dump();

  std::vector<std::uint8_t> out{'N', 'D', 'A', 'S', 'N', 'A', 'P', '1'};
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto &[name, mlp] : nets) {
    for (const auto *p : mlp->parameters()) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(p->value.data()[i]));
    }
  }
  return out;
}

std::vector<std::pair<std::string, Mlp>> decode_networks(const std::vector<std::uint8_t> &bytes, long *step) {
  static constexpr char kMagic[] = "NDASNAP1";
  if (bytes.size() < 16 || !std::equal(kMagic, kMagic + 8, bytes.begin())) {
    throw FormatError("snapshot: bad magic");
  }
  const std::uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16) throw FormatError("snapshot: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("snapshot: header is not JSON: ") + e.what());
  }
  if (step != nullptr) *step = header.value("step", 0L);
  std::size_t pos = 16 + header_len;
  std::vector<std::pair<std::string, Mlp>> out;
  for (const auto &net : header.at("networks")) {
    MlpSpec spec{net.at("layerSizes").get<std::vector<int>>(), parse_activation(net.at("hidden")),
                 parse_activation(net.at("output")), net.at("leakySlope").get<double>()};
    const auto name = net.at("name").get<std::string>();
    std::vector<Parameter> weights, biases;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
      const auto read = [&](Eigen::Index rows, Eigen::Index cols, const std::string &pname) {
        Matrix m(rows, cols);
        if (bytes.size() < pos + static_cast<std::size_t>(m.size()) * 8) throw FormatError("snapshot: truncated body");
        for (Eigen::Index i = 0; i < m.size(); ++i, pos += 8) m.data()[i] = std::bit_cast<double>(get_u64(bytes, pos));
        return Parameter(pname, std::move(m));
      };
      weights.push_back(read(spec.layer_sizes[l], spec.layer_sizes[l + 1], name + ".W" + std::to_string(l)));
      biases.push_back(read(1, spec.layer_sizes[l + 1], name + ".b" + std::to_string(l)));
    }
    out.emplace_back(name, Mlp(std::move(spec), std::move(weights), std::move(biases)));
  }
  if (pos != bytes.size()) throw FormatError("snapshot: trailing bytes after parameters");
  return out;
}

void save_snapshot(const GanSnapshot &snapshot, const std::filesystem::path &path,
                   const std::string &extra_header_json) {
  write_file_atomic(path, encode_networks({{"generator", &snapshot.generator},
                                           {"discriminator", &snapshot.discriminator}},
                                          snapshot.step, extra_header_json));
}

GanSnapshot load_snapshot(const std::filesystem::path &path) {
  long step = 0;
  auto nets = decode_networks(read_file_bytes(path), &step);
  if (nets.size() != 2 || nets[0].first != "generator" || nets[1].first != "discriminator") {
    throw FormatError("snapshot does not hold a generator/discriminator pair");
  }
  return GanSnapshot{std::move(nets[0].second), std::move(nets[1].second), step, {}};
}

std::string metrics_csv(const std::vector<GanMetricsRow> &rows) {
  std::ostringstream out;
  out << "step,dLoss,gLoss,meanLogitReal,meanLogitFake,meanLogitNda\n";
  out << std::setprecision(17);
  for (const auto &r : rows) {
    out << r.step << ',' << r.d_loss << ',' << r.g_loss << ',' << r.mean_logit_real << ','
        << r.mean_logit_fake << ',' << r.mean_logit_nda << '\n';
  }
  return out.str();
}

std::string histogram_csv(const std::map<long, long> &histogram) {
  long total = 0;
  for (const auto &[k, v] : histogram) total += v;
  std::ostringstream out;
  out << "count,frequency\n" << std::setprecision(17);
  for (const auto &[k, v] : histogram) {
    out << k << ',' << (total > 0 ? static_cast<double>(v) / static_cast<double>(total) : 0.0) << '\n';
  }
  return out.str();
}

} // namespace nda
