// nda: command-line front end for the NDA laboratory.
//
// Exit codes: 0 ok, 1 usage/validation, 2 runtime failure (or compare metric
// missing), 3 compare --expect bound not met.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nda/cpc.hpp"
#include "nda/divergence.hpp"
#include "nda/error.hpp"
#include "nda/experiments.hpp"
#include "nda/gan.hpp"
#include "nda/io.hpp"
#include "nda/netpbm.hpp"
#include "nda/transforms.hpp"
#include "run_support.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace nda;
using namespace nda::cli;

namespace {

using Runner = std::function<void()>;

struct Command {
  CLI::App *app = nullptr;
  // Validates the parsed flags and returns the work to do. Throwing here exits 1.
  std::function<Runner()> prepare;
};

/// Resolved flag values of a subcommand, in declaration order.
json resolved_config(const CLI::App &sub) {
  json cfg;
  cfg["schemaVersion"] = 1;
  cfg["subcommand"] = sub.get_name();
  for (const CLI::Option *opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "h" || name == "resume" || name == "config") continue;
    if (opt->get_expected_min() == 0) {
      cfg[name] = opt->count() > 0;
      continue;
    }
    std::string value;
    if (opt->count() > 0) {
      const auto &res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = opt->get_default_str();
    }
    if (!value.empty()) cfg[name] = value;
  }
  return cfg;
}

fs::path default_out(const std::string &out, const std::string &subcommand) {
  if (!out.empty()) return out;
  if (const char *env = std::getenv("NDA_OUT"); env && *env) return fs::path(env) / subcommand;
  throw UsageError("--out is required (or set NDA_OUT)");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TransformSpec transform_from(const std::string &kind, int k, double alpha, bool zero_fill) {
  TransformSpec spec;
  try {
    spec.kind = parse_transform_kind(kind);
  } catch (const Error &e) {
    throw UsageError(std::string("--kind/--nda: ") + e.what());
  }
  spec.k = k;
  spec.alpha = alpha;
  spec.zero_fill = zero_fill;
  spec.validate();
  return spec;
}

json meta_json(const TransformSpec &spec, const TransformMeta &meta, std::uint64_t seed) {
  json j;
  j["kind"] = std::string(to_string(spec.kind));
  j["seed"] = seed;
  if (meta.permutation) j["permutation"] = *meta.permutation;
  if (meta.gamma) j["gamma"] = *meta.gamma;
  if (meta.patch) {
    j["patch"] = {{"top", meta.patch->top}, {"left", meta.patch->left},
                  {"height", meta.patch->height}, {"width", meta.patch->width}};
  }
  if (meta.orientation) {
    j["orientation"] = *meta.orientation == StitchOrientation::Horizontal ? "horizontal" : "vertical";
  }
  if (meta.pool_index) j["poolIndex"] = *meta.pool_index;
  return j;
}

/// Runs fn once per seed: directly into out for a single seed, into out/seed-S for a sweep.
void for_each_seed(const CLI::App &sub, const fs::path &out, const std::vector<std::uint64_t> &seeds,
                   bool resume, const std::function<void(std::uint64_t, OutputSet &)> &fn) {
  const auto t0 = std::chrono::steady_clock::now();
  json base = resolved_config(sub);
  const bool sweep = seeds.size() > 1;
  json runs = json::array();
  for (std::uint64_t seed : seeds) {
    json cfg = base;
    cfg["seed"] = std::to_string(seed);
    cfg.erase("seeds");
    const fs::path dir = sweep ? out / ("seed-" + std::to_string(seed)) : out;
    runs.push_back(dir.lexically_relative(out).string());
    if (resume && run_is_current(dir, cfg)) {
      std::cerr << "nda: " << dir.string() << " is up to date\n";
      continue;
    }
    const auto t_run = std::chrono::steady_clock::now();
    OutputSet outputs(dir);
    fn(seed, outputs);
    outputs.write_manifest(cfg, seconds_since(t_run));
  }
  if (sweep) {
    OutputSet top(out);
    json index;
    index["runs"] = runs;
    top.write_json("runs.json", index);
    top.write_manifest(base, seconds_since(t0));
  }
}

std::vector<std::uint64_t> seed_list(const std::string &seeds, std::uint64_t seed) {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : parse_seeds(seeds);
}

// ---------------------------------------------------------------------------

Command add_transform(CLI::App &app) {
  auto *sub = app.add_subcommand("transform", "Apply one NDA transform to an image");
  struct Opts {
    std::string kind, in, out;
    std::vector<std::string> in2;
    int k = 2;
    double alpha = 2.0;
    bool zero_fill = false;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--kind", o->kind, "jigsaw|stitching|cutout|cutmix|mixup|other-class")->required();
  sub->add_option("--k", o->k, "jigsaw grid size")->capture_default_str();
  sub->add_option("--alpha", o->alpha, "mixup Beta concentration")->capture_default_str();
  sub->add_flag("--zero-fill", o->zero_fill, "cutout fills with 0 instead of the patch mean");
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--in", o->in, "input PGM/PPM")->required();
  sub->add_option("--in2", o->in2, "second image (stitching, cutmix, mixup) or pool (other-class)");
  sub->add_option("--out", o->out, "output image path");
  return {sub, [o, sub]() -> Runner {
            const TransformSpec spec = transform_from(o->kind, o->k, o->alpha, o->zero_fill);
            const bool two_image = spec.kind == TransformKind::Stitching || spec.kind == TransformKind::Cutmix ||
                                   spec.kind == TransformKind::Mixup;
            if (two_image && o->in2.size() != 1) throw UsageError("--in2: " + o->kind + " needs exactly one");
            if (spec.kind == TransformKind::OtherClass && o->in2.empty()) {
              throw UsageError("--in2: other-class needs at least one pool image");
            }
            fs::path out = o->out.empty() ? default_out("", "transform") / "out.pgm" : fs::path(o->out);
            return [o, sub, spec, out, two_image]() {
              const auto t0 = std::chrono::steady_clock::now();
              const Image img = load_image(o->in);
              std::vector<Image> second;
              for (const auto &p : o->in2) second.push_back(load_image(p));
              Rng rng(o->seed);
              const Transformed t =
                  apply_transform(spec, img, two_image ? &second.front() : nullptr, second, rng);
              OutputSet outputs(out.has_parent_path() ? out.parent_path() : fs::path("."));
              const std::string stem = out.stem().string();
              outputs.write(out.filename().string(), encode_netpbm(t.image));
              outputs.write_json(stem + ".json", meta_json(spec, t.meta, o->seed));
              outputs.write_manifest(resolved_config(*sub), seconds_since(t0), stem + ".manifest.json");
            };
          }};
}

Command add_verify_theorem1(CLI::App &app) {
  auto *sub = app.add_subcommand("verify-theorem1", "Check the mixture-divergence optimum on random instances");
  struct Opts {
    std::string n = "8", lambda = "0.25,0.5,0.75", f = "js,kl", out;
    int seeds = 10;
    int samples = 100;
    double tol = 1e-3;
    bool resume = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--n", o->n, "sample-space sizes, comma separated")->capture_default_str();
  sub->add_option("--lambda", o->lambda, "mixture weights in (0, 1]")->capture_default_str();
  sub->add_option("--f", o->f, "f-divergences: kl, rkl, js, pearson")->capture_default_str();
  sub->add_option("--seeds", o->seeds, "number of seeds (0 .. seeds-1)")->capture_default_str();
  sub->add_option("--samples", o->samples, "random q probes of the lower bound")->capture_default_str();
  sub->add_option("--tol", o->tol)->capture_default_str();
  sub->add_option("--out", o->out);
  sub->add_flag("--resume", o->resume, "skip when the output directory is already current");
  return {sub, [o, sub]() -> Runner {
            const auto ns = parse_ints(o->n, "--n");
            const auto lambdas = parse_doubles(o->lambda, "--lambda");
            std::vector<FGenerator> fs_;
            for (const auto &name : split_list(o->f)) {
              try {
                fs_.push_back(FGenerator::parse(name));
              } catch (const Error &e) {
                throw UsageError(std::string("--f: ") + e.what());
              }
            }
            if (fs_.empty()) throw UsageError("--f: empty list");
            for (int n : ns) {
              if (n < 2 || n > 64) throw UsageError("--n: sizes must lie in [2, 64]");
            }
            for (double l : lambdas) {
              if (!(l > 0.0 && l <= 1.0)) throw UsageError("--lambda: values must lie in (0, 1]");
            }
            if (o->seeds < 1) throw UsageError("--seeds: need at least one");
            if (!(o->tol > 0.0)) throw UsageError("--tol: must be positive");
            const fs::path out = default_out(o->out, "verify-theorem1");
            return [o, sub, ns, lambdas, fs_, out]() {
              const json cfg = resolved_config(*sub);
              if (o->resume && run_is_current(out, cfg)) return;
              const auto t0 = std::chrono::steady_clock::now();
              json rows = json::array();
              bool all = true;
              double max_tv = 0.0, max_gap = 0.0;
              for (int seed = 0; seed < o->seeds; ++seed) {
                for (int n : ns) {
                  for (double lambda : lambdas) {
                    for (const auto &f : fs_) {
                      auto inst = theorem1_instance(static_cast<std::uint64_t>(seed), static_cast<std::size_t>(n),
                                                    lambda, f);
                      const auto rep = verify_theorem1(inst.problem, o->tol, inst.rng, o->samples);
                      all = all && rep.pass;
                      max_tv = std::max(max_tv, rep.tv);
                      if (rep.closed_form_checked) max_gap = std::max(max_gap, rep.value_gap);
                      json row;
                      row["seed"] = seed;
                      row["n"] = n;
                      row["lambda"] = lambda;
                      row["f"] = std::string(f.name());
                      row["tv"] = rep.tv;
                      row["valueGap"] = rep.closed_form_checked ? json(rep.value_gap) : json(nullptr);
                      row["floorViolation"] = rep.floor_violation;
                      row["iterations"] = rep.iterations;
                      row["pass"] = rep.pass;
                      rows.push_back(row);
                    }
                  }
                }
              }
              OutputSet outputs(out);
              outputs.write_json("report.json", json{{"rows", rows}, {"allPass", all}});
              outputs.write_json("summary.json", json{{"allPass", all ? 1 : 0}, {"maxTv", max_tv},
                                                      {"maxValueGap", max_gap}, {"cases", rows.size()}});
              outputs.write_manifest(cfg, seconds_since(t0));
              std::cout << rows.size() << " cases, " << (all ? "all pass" : "FAILURES") << ", max tv " << max_tv
                        << ", max value gap " << max_gap << "\n";
            };
          }};
}

struct GanOpts {
  std::string data, nda, seeds, out, eval_nda = "jigsaw", g_hidden, d_hidden;
  int dots = 6;
  double lambda = 0.25;
  long steps = 20000;
  std::uint64_t seed = 0;
  int batch = 64, d_steps = 4, latent = 16;
  double lr = 2e-4;
  long log_every = 100;
  std::size_t train_size = kDotsTrainSize, test_size = kDotsTestSize;
  long samples = 1000;
  bool resume = false;
};

json gan_summary(std::uint64_t seed, const NdaGanConfig &cfg, const GanSnapshot &snap, const GanEvaluation &ev) {
  json s;
  s["seed"] = seed;
  s["lambda"] = cfg.lambda;
  s["steps"] = snap.step;
  s["target"] = ev.target;
  s["massAtTarget"] = ev.mass_at_target;
  s["meanLogitGap"] = ev.gap.mean_gap;
  s["auroc"] = ev.gap.auroc;
  if (!snap.metrics.empty()) {
    const auto &last = snap.metrics.back();
    s["dLoss"] = last.d_loss;
    s["gLoss"] = last.g_loss;
  }
  return s;
}

Image sample_grid(const GanSnapshot &snap, std::uint64_t seed) {
  Rng rng = Rng(seed).derive(data_streams::kGanEval).derive(3);
  const Matrix out = snap.generator.predict(sample_latent(64, snap.generator.input_size(), rng));
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(out.cols()))));
  return tile_images(matrix_to_images(out, side, side), 8);
}

Command add_train_gan(CLI::App &app) {
  auto *sub = app.add_subcommand("train-gan", "Train a toy NDA-GAN on dots images");
  auto o = std::make_shared<GanOpts>();
  NdaGanConfig defaults;
  auto join = [](const std::vector<int> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  o->g_hidden = join(defaults.generator_hidden);
  o->d_hidden = join(defaults.discriminator_hidden);
  sub->add_option("--data", o->data, "training data: dots")->required();
  sub->add_option("--dots", o->dots, "dots per training image")->capture_default_str();
  sub->add_option("--nda", o->nda, "NDA sources, e.g. numerosity:4,5,7 or jigsaw (join with +)");
  sub->add_option("--lambda", o->lambda, "generator share of the fake batch")->capture_default_str();
  sub->add_option("--steps", o->steps, "discriminator updates")->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--seeds", o->seeds, "comma-separated sweep; one subdirectory per seed");
  sub->add_option("--batch", o->batch)->capture_default_str();
  sub->add_option("--d-steps", o->d_steps, "discriminator updates per generator update")->capture_default_str();
  sub->add_option("--latent", o->latent)->capture_default_str();
  sub->add_option("--lr", o->lr)->capture_default_str();
  sub->add_option("--g-hidden", o->g_hidden)->capture_default_str();
  sub->add_option("--d-hidden", o->d_hidden)->capture_default_str();
  sub->add_option("--log-every", o->log_every)->capture_default_str();
  sub->add_option("--train-size", o->train_size)->capture_default_str();
  sub->add_option("--test-size", o->test_size)->capture_default_str();
  sub->add_option("--samples", o->samples, "generated images for the histogram")->capture_default_str();
  sub->add_option("--eval-nda", o->eval_nda, "transform for the logit-gap evaluation")->capture_default_str();
  sub->add_option("--out", o->out);
  sub->add_flag("--resume", o->resume, "skip seeds whose output is already current");
  return {sub, [o, sub]() -> Runner {
            if (o->data != "dots") throw UsageError("--data: only 'dots' is available");
            NdaGanConfig cfg;
            cfg.lambda = o->lambda;
            if (!o->nda.empty()) {
              try {
                cfg.nda = parse_nda_sources(o->nda);
              } catch (const Error &e) {
                throw UsageError(std::string("--nda: ") + e.what());
              }
            }
            cfg.latent_dim = o->latent;
            cfg.batch_size = o->batch;
            cfg.d_steps = o->d_steps;
            cfg.steps = o->steps;
            cfg.adam.lr = o->lr;
            cfg.log_every = o->log_every;
            cfg.generator_hidden = parse_ints(o->g_hidden, "--g-hidden");
            cfg.discriminator_hidden = parse_ints(o->d_hidden, "--d-hidden");
            cfg.validate();
            DotsSpec dots;
            dots.dot_count = o->dots;
            dots.validate();
            cfg.dots = dots;
            const TransformSpec eval_nda = transform_from(o->eval_nda, 2, 2.0, false);
            if (o->train_size < static_cast<std::size_t>(10 * cfg.batch_size)) {
              throw UsageError("--train-size: need at least 10 * batch images");
            }
            if (o->test_size < 2 || o->samples < 1) throw UsageError("--test-size/--samples too small");
            const auto seeds = seed_list(o->seeds, o->seed);
            const fs::path out = default_out(o->out, "train-gan");
            return [o, sub, cfg, dots, eval_nda, seeds, out]() {
              for_each_seed(*sub, out, seeds, o->resume, [&](std::uint64_t seed, OutputSet &outputs) {
                NdaGanConfig run = cfg;
                run.seed = seed;
                const auto train = dots_split(dots, seed, Split::Train, o->train_size);
                const auto test = dots_split(dots, seed, Split::Test, o->test_size);
                const GanSnapshot snap = train_nda_gan(run, train);
                const GanEvaluation ev = evaluate_gan(snap, dots.dot_count, test, eval_nda, seed, o->samples);
                const json summary = gan_summary(seed, run, snap, ev);
                outputs.write("metrics.csv", metrics_csv(snap.metrics));
                outputs.write("histogram.csv", histogram_csv(ev.histogram));
                outputs.write("samples.pgm", encode_netpbm(sample_grid(snap, seed)));
                outputs.write("snapshot.bin",
                              encode_networks({{"generator", &snap.generator}, {"discriminator", &snap.discriminator}},
                                              snap.step, json{{"seed", seed}, {"lambda", run.lambda}}.dump()));
                outputs.write_json("summary.json", summary);
                std::cout << "seed " << seed << ": mass at " << dots.dot_count << " = " << ev.mass_at_target
                          << ", mean logit gap = " << ev.gap.mean_gap << ", auroc = " << ev.gap.auroc << "\n";
              });
            };
          }};
}

GanSnapshot load_gan(const std::string &path) {
  try {
    return load_snapshot(path);
  } catch (const IoError &e) {
    throw UsageError(std::string("--snapshot: ") + e.what());
  }
}

Command add_numerosity(CLI::App &app) {
  auto *sub = app.add_subcommand("numerosity", "Dot-count histogram of a trained generator");
  struct Opts {
    std::string snapshot, out;
    int target = 6;
    long samples = 1000;
    std::uint64_t seed = 0;
    bool resume = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--snapshot", o->snapshot, "snapshot.bin from train-gan")->required();
  sub->add_option("--target", o->target, "dot count whose mass is reported")->capture_default_str();
  sub->add_option("--samples", o->samples)->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--out", o->out);
  sub->add_flag("--resume", o->resume);
  return {sub, [o, sub]() -> Runner {
            if (o->samples < 1) throw UsageError("--samples: must be positive");
            const fs::path out = default_out(o->out, "numerosity");
            GanSnapshot snap = load_gan(o->snapshot);
            return [o, sub, out, snap = std::move(snap)]() {
              for_each_seed(*sub, out, {o->seed}, o->resume, [&](std::uint64_t seed, OutputSet &outputs) {
                Rng rng = Rng(seed).derive(data_streams::kGanEval).derive(1);
                const auto hist = numerosity_histogram(snap, o->samples, rng);
                outputs.write("histogram.csv", histogram_csv(hist));
                outputs.write("samples.pgm", encode_netpbm(sample_grid(snap, seed)));
                outputs.write_json("summary.json", json{{"seed", seed}, {"target", o->target},
                                                        {"massAtTarget", mass_at(hist, o->target)}});
                std::cout << "mass at " << o->target << " = " << mass_at(hist, o->target) << "\n";
              });
            };
          }};
}

Command add_anomaly(CLI::App &app) {
  auto *sub = app.add_subcommand("anomaly", "Discriminator logits on clean vs NDA-transformed test dots");
  struct Opts {
    std::string snapshot, nda = "jigsaw", out;
    int dots = 6;
    std::size_t test_size = kDotsTestSize;
    std::uint64_t seed = 0;
    bool resume = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--snapshot", o->snapshot, "snapshot.bin from train-gan")->required();
  sub->add_option("--nda", o->nda, "transform applied to the test images")->capture_default_str();
  sub->add_option("--dots", o->dots)->capture_default_str();
  sub->add_option("--test-size", o->test_size)->capture_default_str();
  sub->add_option("--seed", o->seed, "selects the held-out test set")->capture_default_str();
  sub->add_option("--out", o->out);
  sub->add_flag("--resume", o->resume);
  return {sub, [o, sub]() -> Runner {
            const TransformSpec spec = transform_from(o->nda, 2, 2.0, false);
            if (o->test_size < 2) throw UsageError("--test-size: need at least 2");
            DotsSpec dots;
            dots.dot_count = o->dots;
            dots.validate();
            const fs::path out = default_out(o->out, "anomaly");
            GanSnapshot snap = load_gan(o->snapshot);
            return [o, sub, out, spec, dots, snap = std::move(snap)]() {
              for_each_seed(*sub, out, {o->seed}, o->resume, [&](std::uint64_t seed, OutputSet &outputs) {
                const auto test = dots_split(dots, seed, Split::Test, o->test_size);
                Rng rng = Rng(seed).derive(data_streams::kGanEval).derive(2);
                const auto rep = logit_gap_report(snap.discriminator, test, spec, rng);
                std::ostringstream csv;
                csv.precision(17);
                csv << "index,gap\n";
                for (std::size_t i = 0; i < rep.gaps.size(); ++i) csv << i << ',' << rep.gaps[i] << '\n';
                outputs.write("gaps.csv", csv.str());
                outputs.write_json("summary.json", json{{"seed", seed}, {"nda", std::string(to_string(spec.kind))},
                                                        {"meanLogitGap", rep.mean_gap}, {"auroc", rep.auroc}});
                std::cout << "mean logit gap " << rep.mean_gap << ", auroc " << rep.auroc << "\n";
              });
            };
          }};
}

json separation_json(const SeparationReport &rep) {
  return json{{"meanDist", rep.mean_distance}, {"minDist", rep.min_distance},
              {"probeAcc", rep.probe_accuracy}, {"samples", rep.samples}};
}

Command add_train_cpc(CLI::App &app) {
  auto *sub = app.add_subcommand("train-cpc", "Train a CPC or NDA-CPC encoder on toy textures");
  struct Opts {
    int n = 64, m = 8, embed_dim = 8;
    std::string nda = "jigsaw", nda_source = "anchor", hidden, seeds, out;
    long steps = 5000, log_every = 100;
    double temperature = 0.07, lr = 1e-3;
    bool critic = false, resume = false;
    std::uint64_t seed = 0;
    std::size_t train_size = kTextureTrainSize, test_size = kTextureTestSize;
  };
  auto o = std::make_shared<Opts>();
  CpcConfig defaults;
  o->lr = defaults.adam.lr;
  for (std::size_t i = 0; i < defaults.encoder_hidden.size(); ++i) {
    o->hidden += (i ? "," : "") + std::to_string(defaults.encoder_hidden[i]);
  }
  sub->add_option("--n", o->n, "anchors per batch")->capture_default_str();
  sub->add_option("--m", o->m, "NDA negatives per anchor; 0 gives plain CPC")->capture_default_str();
  sub->add_option("--nda", o->nda, "transform producing the NDA negatives")->capture_default_str();
  sub->add_option("--nda-source", o->nda_source, "anchor|batch: image the negatives are made from")
      ->capture_default_str();
  sub->add_option("--steps", o->steps)->capture_default_str();
  sub->add_option("--temperature", o->temperature)->capture_default_str();
  sub->add_option("--embed-dim", o->embed_dim)->capture_default_str();
  sub->add_option("--hidden", o->hidden, "encoder hidden sizes")->capture_default_str();
  sub->add_option("--lr", o->lr)->capture_default_str();
  sub->add_flag("--critic", o->critic, "train a bilinear critic (initialized to identity)");
  sub->add_option("--log-every", o->log_every)->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--seeds", o->seeds, "comma-separated sweep; one subdirectory per seed");
  sub->add_option("--train-size", o->train_size)->capture_default_str();
  sub->add_option("--test-size", o->test_size)->capture_default_str();
  sub->add_option("--out", o->out);
  sub->add_flag("--resume", o->resume);
  return {sub, [o, sub]() -> Runner {
            CpcConfig cfg;
            cfg.n = o->n;
            cfg.m = o->m;
            cfg.nda = transform_from(o->nda, 2, 2.0, false);
            if (o->nda_source == "anchor") {
              cfg.nda_source = NdaNegativeSource::Anchor;
            } else if (o->nda_source == "batch") {
              cfg.nda_source = NdaNegativeSource::RandomBatchImage;
            } else {
              throw UsageError("--nda-source: expected anchor or batch");
            }
            cfg.steps = o->steps;
            cfg.temperature = o->temperature;
            cfg.embed_dim = o->embed_dim;
            cfg.encoder_hidden = parse_ints(o->hidden, "--hidden");
            cfg.adam.lr = o->lr;
            cfg.trainable_critic = o->critic;
            cfg.log_every = o->log_every;
            cfg.validate();
            if (o->train_size < static_cast<std::size_t>(cfg.n)) throw UsageError("--train-size: smaller than --n");
            if (o->test_size < 2) throw UsageError("--test-size: need at least 2");
            const auto seeds = seed_list(o->seeds, o->seed);
            const fs::path out = default_out(o->out, "train-cpc");
            return [o, sub, cfg, seeds, out]() {
              for_each_seed(*sub, out, seeds, o->resume, [&](std::uint64_t seed, OutputSet &outputs) {
                CpcConfig run = cfg;
                run.seed = seed;
                const auto train = texture_split(seed, Split::Train, o->train_size);
                const auto test = texture_split(seed, Split::Test, o->test_size);
                const CpcResult res = train_cpc(run, train);
                const SeparationReport rep = evaluate_cpc(res.encoder, test, run.nda, seed);
                outputs.write("trace.csv", cpc_trace_csv(res.trace));
                outputs.write("encoder.bin", encode_networks({{"encoder", &res.encoder}}, run.steps,
                                                             json{{"seed", seed}, {"m", run.m}}.dump()));
                outputs.write_json("separation.json", separation_json(rep));
                json summary = separation_json(rep);
                summary["seed"] = seed;
                summary["m"] = run.m;
                summary["meanCos"] = 1.0 - rep.mean_distance;
                if (!res.trace.empty()) summary["finalLoss"] = res.trace.back().loss;
                outputs.write_json("summary.json", summary);
                std::cout << "seed " << seed << ": mean cos(x, nda(x)) = " << 1.0 - rep.mean_distance
                          << ", probe accuracy = " << rep.probe_accuracy << "\n";
              });
            };
          }};
}

Command add_separation(CLI::App &app) {
  auto *sub = app.add_subcommand("separation", "Embedding separation between data and NDA transforms");
  struct Opts {
    std::string encoder, nda = "jigsaw", out;
    std::size_t samples = kTextureTestSize;
    std::uint64_t seed = 0;
    bool resume = false;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--encoder", o->encoder, "encoder.bin from train-cpc")->required();
  sub->add_option("--nda", o->nda)->capture_default_str();
  sub->add_option("--samples", o->samples, "held-out textures")->capture_default_str();
  sub->add_option("--seed", o->seed, "selects the held-out set")->capture_default_str();
  sub->add_option("--out", o->out);
  sub->add_flag("--resume", o->resume);
  return {sub, [o, sub]() -> Runner {
            const TransformSpec spec = transform_from(o->nda, 2, 2.0, false);
            if (o->samples < 2) throw UsageError("--samples: need at least 2");
            std::vector<std::pair<std::string, Mlp>> nets;
            try {
              nets = decode_networks(read_file_bytes(o->encoder), nullptr);
            } catch (const IoError &e) {
              throw UsageError(std::string("--encoder: ") + e.what());
            }
            if (nets.size() != 1 || nets.front().first != "encoder") {
              throw UsageError("--encoder: file does not hold an encoder");
            }
            const fs::path out = default_out(o->out, "separation");
            return [o, sub, spec, out, enc = nets.front().second]() {
              for_each_seed(*sub, out, {o->seed}, o->resume, [&](std::uint64_t seed, OutputSet &outputs) {
                const auto test = texture_split(seed, Split::Test, o->samples);
                const auto rep = evaluate_cpc(enc, test, spec, seed);
                outputs.write_json("separation.json", separation_json(rep));
                json summary = separation_json(rep);
                summary["seed"] = seed;
                summary["meanCos"] = 1.0 - rep.mean_distance;
                outputs.write_json("summary.json", summary);
                std::cout << "mean distance " << rep.mean_distance << ", probe accuracy " << rep.probe_accuracy
                          << "\n";
              });
            };
          }};
}

std::optional<double> read_metric(const fs::path &dir, const std::string &metric) {
  const fs::path path = fs::is_directory(dir) ? dir / "summary.json" : dir;
  if (!fs::exists(path)) return std::nullopt;
  const auto j = nlohmann::json::parse(read_file_text(path), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains(metric)) return std::nullopt;
  const auto &v = j[metric];
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  if (!v.is_number()) return std::nullopt;
  return v.get<double>();
}

/// ">=0.1", ">0", "<=x", "<x", "==x" applied to the delta.
std::function<bool(double)> parse_expect(const std::string &text) {
  static const std::vector<std::string> ops = {">=", "<=", "==", ">", "<"};
  for (const auto &op : ops) {
    if (text.rfind(op, 0) != 0) continue;
    const double bound = parse_doubles(text.substr(op.size()), "--expect").front();
    if (op == ">=") return [bound](double d) { return d >= bound; };
    if (op == "<=") return [bound](double d) { return d <= bound; };
    if (op == "==") return [bound](double d) { return d == bound; };
    if (op == ">") return [bound](double d) { return d > bound; };
    return [bound](double d) { return d < bound; };
  }
  throw UsageError("--expect: expected a bound such as \">=0.10\"");
}

Command add_compare(CLI::App &app, int &exit_code) {
  auto *sub = app.add_subcommand("compare", "Delta b - a of one summary metric between two runs");
  struct Opts {
    std::string a, b, metric, expect;
  };
  auto o = std::make_shared<Opts>();
  sub->add_option("--a", o->a, "baseline run directory (or summary.json)")->required();
  sub->add_option("--b", o->b, "candidate run directory (or summary.json)")->required();
  sub->add_option("--metric", o->metric, "summary.json key")->required();
  sub->add_option("--expect", o->expect, "bound on the delta, e.g. \">=0.10\"");
  return {sub, [o, &exit_code]() -> Runner {
            std::function<bool(double)> check;
            if (!o->expect.empty()) check = parse_expect(o->expect);
            return [o, check, &exit_code]() {
              const auto a = read_metric(o->a, o->metric);
              const auto b = read_metric(o->b, o->metric);
              if (!a || !b) {
                std::cerr << "nda compare: metric '" << o->metric << "' missing from " << (a ? o->b : o->a) << "\n";
                exit_code = kExitRuntime;
                return;
              }
              json r{{"metric", o->metric}, {"a", *a}, {"b", *b}, {"delta", *b - *a}};
              if (check) {
                r["expect"] = o->expect;
                r["met"] = check(*b - *a);
              }
              std::cout << r.dump() << "\n";
              if (check && !check(*b - *a)) exit_code = kExitExpectation;
            };
          }};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"NDA laboratory: negative data augmentation experiments at toy scale", "nda"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());
  int exit_code = kExitOk;
  std::vector<Command> commands = {add_transform(app),  add_verify_theorem1(app), add_train_gan(app),
                                   add_numerosity(app), add_anomaly(app),         add_train_cpc(app),
                                   add_separation(app), add_compare(app, exit_code)};
  std::string config_path;  // consumed by merge_config_file; declared for --help
  for (auto &c : commands) {
    c.app->add_option("--config", config_path, "JSON config file (schemaVersion 1); flags override it");
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = merge_config_file(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "nda: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError &e) {
    std::cerr << "nda: " << e.what() << "\n";
    return kExitUsage;
  }

  const Command *chosen = nullptr;
  for (const auto &c : commands) {
    if (c.app->parsed()) chosen = &c;
  }
  Runner run;
  try {
    run = chosen->prepare();
  } catch (const UsageError &e) {
    std::cerr << "nda " << chosen->app->get_name() << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "nda " << chosen->app->get_name() << ": invalid configuration: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    run();
  } catch (const std::exception &e) {
    std::cerr << "nda " << chosen->app->get_name() << ": " << e.what() << "\n";
    return kExitRuntime;
  }
  return exit_code;
}
