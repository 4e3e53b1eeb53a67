// Acceptance run: one PASS/FAIL line per primary criterion, then exit 1 if any failed.
//
//   acceptance            every criterion (the training ones take about 40 minutes)
//   acceptance a b ...    only the named criteria

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli_harness.hpp"
#include "gradcheck.hpp"
#include "nda/cpc.hpp"
#include "nda/divergence.hpp"
#include "nda/experiments.hpp"
#include "nda/gan.hpp"
#include "transform_invariants.hpp"

using namespace nda;
using namespace nda::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

// ---------------------------------------------------------------- divergence

const std::vector<std::size_t> kSizes = {4, 8, 16};
const std::vector<double> kLambdas = {0.25, 0.5, 0.75};
const std::vector<FKind> kKinds = {FKind::KL, FKind::JensenShannon};

Verdict theorem1() {
  const auto t0 = Clock::now();
  double max_tv = 0.0, max_gap = 0.0;
  int cases = 0, bad = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (auto n : kSizes)
      for (double lambda : kLambdas)
        for (auto kind : kKinds) {
          auto inst = theorem1_instance(seed, n, lambda, FGenerator(kind));
          const auto res = minimize_mixture(inst.problem, 1e-4);
          const double tv = total_variation(res.q, inst.problem.p);
          const double gap = std::abs(res.value - inst.problem.closed_form_optimum());
          max_tv = std::max(max_tv, tv);
          max_gap = std::max(max_gap, gap);
          ++cases;
          if (!(tv <= 1e-3 && gap <= 1e-4)) ++bad;
        }
  const double secs = since(t0);
  return {bad == 0 && secs <= 30.0, std::to_string(cases) + " cases, " + std::to_string(bad) +
                                        " outside tolerance, max TV " + sci(max_tv) + " (<= 1e-3), max |value - closed form| " +
                                        sci(max_gap) + " (<= 1e-4), " + fmt(secs, 3) + " s (<= 30 s)"};
}

Verdict variational_tightness() {
  const auto t0 = Clock::now();
  double max_err = 0.0;
  long exceed = 0, probes = 0;
  int cases = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (auto n : kSizes)
      for (double lambda : kLambdas)
        for (auto kind : kKinds) {
          auto inst = theorem1_instance(seed, n, lambda, FGenerator(kind));
          const auto &prob = inst.problem;
          const auto res = minimize_mixture(prob, 1e-4);
          const auto m = prob.mixture(res.q);
          const double div = f_divergence(prob.p, m, prob.f);
          const auto d = optimal_discriminator(prob, res.q);
          max_err = std::max(max_err, std::abs(variational_objective(prob.p, m, d, prob.f) - div));
          ++cases;
          Rng rng = inst.rng.derive(77);
          for (int k = 0; k < 100; ++k) {
            auto e = d;
            // Finite entries jittered; limit entries replaced by a random finite value.
            // Draws outside the domain of f* are not feasible discriminators and are redrawn.
            for (std::size_t i = 0; i < e.size(); ++i) {
              do {
                e[i] = std::isfinite(d[i]) ? d[i] + 0.5 * rng.normal() : -3.0 * rng.uniform();
              } while (!prob.f.conjugate_defined(e[i]));
            }
            ++probes;
            if (variational_objective(prob.p, m, e, prob.f) > div + 1e-8) ++exceed;
          }
        }
  const double secs = since(t0);
  return {max_err <= 1e-8 && exceed == 0 && secs <= 10.0,
          std::to_string(cases) + " instances, max |objective - divergence| " + sci(max_err) + " (<= 1e-8), " +
              std::to_string(exceed) + " of " + std::to_string(probes) + " perturbed discriminators exceed it, " +
              fmt(secs, 3) + " s (<= 10 s)"};
}

// ---------------------------------------------------------------- transforms

Verdict transform_invariants() {
  const auto t0 = Clock::now();
  struct Named {
    const char *name;
    InvariantResult (*check)(std::uint64_t, long);
  };
  const Named checks[] = {{"jigsaw multiset", check_jigsaw_multiset},
                          {"jigsaw non-identity", check_jigsaw_non_identity},
                          {"cutout locality", check_cutout_locality},
                          {"cutmix locality", check_cutmix_locality},
                          {"mixup linearity", check_mixup_linearity},
                          {"stitching regions", check_stitching_regions}};
  long failures = 0;
  std::string parts, first;
  for (const auto &c : checks) {
    const auto r = c.check(2024, 1000);
    failures += r.failures;
    parts += std::string(parts.empty() ? "" : ", ") + c.name + " " + std::to_string(r.failures) + "/" +
             std::to_string(r.cases);
    if (first.empty() && r.failures > 0) first = std::string(" first: ") + c.name + " " + r.first_failure;
  }
  const double secs = since(t0);
  return {failures == 0 && secs <= 10.0, "failures " + parts + ", " + fmt(secs, 3) + " s (<= 10 s)" + first};
}

// ---------------------------------------------------------------- autodiff

Verdict autodiff_oracle() {
  const auto t0 = Clock::now();
  Rng rng(4242);
  double worst = 0.0;
  std::string where;
  long entries = 0;
  const int kinds = static_cast<int>(ComboKind::kCount);
  for (int i = 0; i < 200; ++i) {
    const auto kind = static_cast<ComboKind>(i % kinds);
    const auto r = random_combo(kind, rng);
    entries += r.checked;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = std::string(combo_name(kind)) + " " + r.worst;
    }
  }
  const double secs = since(t0);
  return {worst <= 1e-5 && secs <= 60.0,
          "200 combinations (" + std::to_string(kinds) + " loss kinds incl. cpc, nda-cpc, gan), " +
              std::to_string(entries) + " entries, max relative error " + sci(worst) + " at " + where +
              " (<= 1e-5), " + fmt(secs, 3) + " s (<= 60 s)"};
}

// ---------------------------------------------------------------- GAN runs

struct GanRun {
  std::uint64_t seed = 0;
  double lambda = 1.0;
  std::string nda;
  double mass6 = 0.0;
  double gap = 0.0;
  double auroc = 0.0;
  double seconds = 0.0;
};

GanRun run_gan(std::uint64_t seed, double lambda, const std::string &nda) {
  const auto t0 = Clock::now();
  NdaGanConfig cfg;
  cfg.seed = seed;
  cfg.lambda = lambda;
  if (!nda.empty()) cfg.nda = parse_nda_sources(nda);
  const DotsSpec dots;
  const auto train = dots_split(dots, seed, Split::Train, kDotsTrainSize);
  const auto test = dots_split(dots, seed, Split::Test, kDotsTestSize);
  const auto snap = train_nda_gan(cfg, train);
  const auto ev = evaluate_gan(snap, dots.dot_count, test, TransformSpec{}, seed, 1000);
  GanRun r{seed, lambda, nda.empty() ? "none" : nda, ev.mass_at_target, ev.gap.mean_gap, ev.gap.auroc, since(t0)};
  std::cout << "  gan seed " << seed << " lambda " << lambda << " nda " << r.nda << ": mass6 " << fmt(r.mass6)
            << ", mean D(x)-D(jigsaw x) " << fmt(r.gap) << ", auroc " << fmt(r.auroc) << ", " << fmt(r.seconds, 3)
            << " s" << std::endl;
  return r;
}

struct GanSuite {
  std::vector<GanRun> baseline, numerosity25, numerosity50, jigsaw25;
  double max_seconds = 0.0;
};

const GanSuite &gan_suite() {
  static const GanSuite suite = [] {
    GanSuite s;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      s.baseline.push_back(run_gan(seed, 1.0, ""));
      s.numerosity25.push_back(run_gan(seed, 0.25, "numerosity:4,5,7"));
      s.numerosity50.push_back(run_gan(seed, 0.5, "numerosity:4,5,7"));
      s.jigsaw25.push_back(run_gan(seed, 0.25, "jigsaw"));
    }
    for (const auto *runs : {&s.baseline, &s.numerosity25, &s.numerosity50, &s.jigsaw25})
      for (const auto &r : *runs) s.max_seconds = std::max(s.max_seconds, r.seconds);
    return s;
  }();
  return suite;
}

double mean_of(const std::vector<GanRun> &runs, double GanRun::*field) {
  double s = 0.0;
  for (const auto &r : runs) s += r.*field;
  return s / static_cast<double>(runs.size());
}

Verdict numerosity() {
  const auto &s = gan_suite();
  const double base = mean_of(s.baseline, &GanRun::mass6), nda = mean_of(s.numerosity25, &GanRun::mass6);
  std::string per;
  for (std::size_t i = 0; i < s.baseline.size(); ++i)
    per += (i ? "; " : "") + std::string("seed ") + std::to_string(i) + " " + fmt(s.baseline[i].mass6, 3) + " -> " +
           fmt(s.numerosity25[i].mass6, 3);
  return {nda >= base + 0.10 && s.max_seconds <= 900.0,
          "mean mass at 6: baseline " + fmt(base) + ", NDA {4,5,7} lambda 0.25 " + fmt(nda) + ", delta " +
              fmt(nda - base) + " (>= 0.10) [" + per + "], slowest run " + fmt(s.max_seconds, 4) + " s (<= 900 s)"};
}

Verdict logit_gap() {
  const auto &s = gan_suite();
  int violations = 0;
  std::string per;
  for (std::size_t i = 0; i < s.baseline.size(); ++i) {
    const double g = s.jigsaw25[i].gap, b = s.baseline[i].gap;
    if (!(g > 0.0 && g > b)) ++violations;
    per += (i ? "; " : "") + std::string("seed ") + std::to_string(i) + " NDA " + fmt(g) + " vs baseline " + fmt(b);
  }
  return {violations == 0, "mean D(x) - D(jigsaw(x)) over 500 held-out dots, jigsaw NDA lambda 0.25: " + per + ", " +
                               std::to_string(violations) + " violations (0 allowed)"};
}

Verdict anomaly_auroc() {
  const auto &s = gan_suite();
  const double base = mean_of(s.baseline, &GanRun::auroc), nda = mean_of(s.jigsaw25, &GanRun::auroc);
  return {nda - base >= 0.05, "mean AUROC clean vs jigsawed dots-6: baseline " + fmt(base) + ", jigsaw NDA " +
                                  fmt(nda) + ", delta " + fmt(nda - base) + " (>= 0.05)"};
}

Verdict lambda_sweep() {
  const auto &s = gan_suite();
  const double m1 = mean_of(s.baseline, &GanRun::mass6);
  const double m5 = mean_of(s.numerosity50, &GanRun::mass6);
  const double m25 = mean_of(s.numerosity25, &GanRun::mass6);
  std::ostringstream table;
  table << "lambda,seed0,seed1,seed2,mean\n";
  for (const auto *runs : {&s.baseline, &s.numerosity50, &s.numerosity25}) {
    table << runs->front().lambda;
    for (const auto &r : *runs) table << "," << r.mass6;
    table << "," << mean_of(*runs, &GanRun::mass6) << "\n";
  }
  std::cout << "  mass-at-6 by lambda (numerosity NDA):\n";
  std::istringstream lines(table.str());
  for (std::string line; std::getline(lines, line);) std::cout << "    " << line << "\n";
  write_file_atomic("lambda_sweep.csv", table.str());
  return {m25 > m1 && m5 > m1, "mean mass at 6: lambda 1.0 " + fmt(m1) + ", 0.5 " + fmt(m5) + ", 0.25 " + fmt(m25) +
                                   " (0.25 and 0.5 must beat 1.0); table in lambda_sweep.csv"};
}

// ---------------------------------------------------------------- CPC

Verdict cpc_separation() {
  double cos_gap = 0.0, probe_gap = 0.0, slowest = 0.0;
  std::string per;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto train = texture_split(seed, Split::Train, kTextureTrainSize);
    const auto test = texture_split(seed, Split::Test, kTextureTestSize);
    SeparationReport rep[2];
    for (int m : {0, 8}) {
      const auto t0 = Clock::now();
      CpcConfig cfg;
      cfg.seed = seed;
      cfg.m = m;
      const auto res = train_cpc(cfg, train);
      rep[m ? 1 : 0] = evaluate_cpc(res.encoder, test, cfg.nda, seed);
      const double secs = since(t0);
      slowest = std::max(slowest, secs);
      std::cout << "  cpc seed " << seed << " m " << m << ": mean cos " << fmt(1.0 - rep[m ? 1 : 0].mean_distance)
                << ", probe " << fmt(rep[m ? 1 : 0].probe_accuracy) << ", " << fmt(secs, 3) << " s" << std::endl;
    }
    // cos = 1 - distance, so the cosine drop is the distance increase.
    cos_gap += (rep[1].mean_distance - rep[0].mean_distance) / 3.0;
    probe_gap += (rep[1].probe_accuracy - rep[0].probe_accuracy) / 3.0;
    per += (seed ? "; " : "") + std::string("seed ") + std::to_string(seed) + " cos " +
           fmt(1.0 - rep[0].mean_distance, 3) + " -> " + fmt(1.0 - rep[1].mean_distance, 3) + ", probe " +
           fmt(rep[0].probe_accuracy, 3) + " -> " + fmt(rep[1].probe_accuracy, 3);
  }
  return {cos_gap >= 0.1 && probe_gap >= 0.05 && slowest <= 600.0,
          "CPC (m=0) -> NDA-CPC (m=8, jigsaw), 5k steps: mean cos lower by " + fmt(cos_gap) + " (>= 0.1), probe higher by " +
              fmt(probe_gap) + " (>= 0.05) [" + per + "], slowest run " + fmt(slowest, 4) + " s (<= 600 s)"};
}

// ---------------------------------------------------------------- CLI determinism

Verdict determinism_audit() {
  const auto root = fresh_dir("audit");
  const auto in = write_sample_pgm(root, "a.pgm", 1), in2 = write_sample_pgm(root, "b.pgm", 2);
  auto q = [](const fs::path &p) { return "'" + p.string() + "'"; };
  struct Job {
    std::string name;
    std::function<std::string(const fs::path &)> args;  // given the run directory
    std::string manifest;
  };
  std::vector<Job> jobs;
  for (const char *kind : {"jigsaw", "stitching", "cutout", "cutmix", "mixup", "other-class"}) {
    jobs.push_back({std::string("transform ") + kind, [=](const fs::path &d) {
                      return std::string("transform --kind ") + kind + " --seed 3 --in " + q(in) + " --in2 " + q(in2) +
                             " --out " + q(d / "out.pgm");
                    },
                    "out.manifest.json"});
  }
  jobs.push_back({"verify-theorem1", [=](const fs::path &d) { return "verify-theorem1 --seeds 2 --out " + q(d); },
                  "manifest.json"});
  const std::string gan = "train-gan --data dots --steps 16 --train-size 640 --test-size 20 --samples 50 "
                          "--g-hidden 16 --d-hidden 16 --log-every 8 --nda jigsaw --lambda 0.5";
  jobs.push_back({"train-gan", [=](const fs::path &d) { return gan + " --out " + q(d); }, "manifest.json"});
  jobs.push_back({"train-gan --seeds", [=](const fs::path &d) { return gan + " --seeds 0,1 --out " + q(d); },
                  "manifest.json"});
  const fs::path snap = root / "gan-ref" / "snapshot.bin";
  jobs.push_back({"numerosity", [=](const fs::path &d) {
                    return "numerosity --snapshot " + q(snap) + " --samples 50 --out " + q(d);
                  },
                  "manifest.json"});
  jobs.push_back({"anomaly", [=](const fs::path &d) {
                    return "anomaly --snapshot " + q(snap) + " --test-size 20 --out " + q(d);
                  },
                  "manifest.json"});
  const std::string cpc = "train-cpc --steps 4 --n 8 --m 2 --hidden 16 --train-size 64 --test-size 20 --log-every 2";
  jobs.push_back({"train-cpc", [=](const fs::path &d) { return cpc + " --out " + q(d); }, "manifest.json"});
  const fs::path enc = root / "cpc-ref" / "encoder.bin";
  jobs.push_back({"separation", [=](const fs::path &d) {
                    return "separation --encoder " + q(enc) + " --samples 20 --out " + q(d);
                  },
                  "manifest.json"});

  if (run_cli(gan + " --out " + q(root / "gan-ref")).exit_code != 0 ||
      run_cli(cpc + " --out " + q(root / "cpc-ref")).exit_code != 0) {
    return {false, "could not produce the reference snapshot/encoder"};
  }
  int bad = 0;
  std::string failed;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    std::map<std::string, std::string> sums[2];
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      const auto dir = root / ("job" + std::to_string(i) + "-" + std::to_string(rep));
      fs::create_directories(dir);
      const auto r = run_cli(jobs[i].args(dir));
      if (r.exit_code != 0 || !fs::exists(dir / jobs[i].manifest)) {
        std::cout << "  " << jobs[i].name << " exited " << r.exit_code << ": " << r.output << std::endl;
        ok = false;
        break;
      }
      sums[rep] = manifest_checksums(dir / jobs[i].manifest);
    }
    if (!ok || sums[0].empty() || sums[0] != sums[1]) {
      ++bad;
      failed += " " + jobs[i].name;
    }
  }
  // compare writes no files; its report is its stdout.
  const std::string cmp = "compare --a " + q(root / "gan-ref") + " --b " + q(root / "gan-ref") + " --metric auroc";
  const auto c1 = run_cli(cmp), c2 = run_cli(cmp);
  if (c1.exit_code != 0 || c1.output != c2.output) {
    ++bad;
    failed += " compare";
  }
  const auto total = jobs.size() + 1;
  return {bad == 0, std::to_string(total - static_cast<std::size_t>(bad)) + "/" + std::to_string(total) +
                        " subcommand runs reproduce checksummed-identical artifacts on rerun" +
                        (failed.empty() ? "" : "; differing:" + failed)};
}

} // namespace

int main(int argc, char **argv) {
  struct Criterion {
    const char *name;
    Verdict (*run)();
  };
  const Criterion criteria[] = {
      {"theorem1-numerical", theorem1},
      {"variational-tightness", variational_tightness},
      {"transform-invariants", transform_invariants},
      {"autodiff-oracle", autodiff_oracle},
      {"numerosity-containment", numerosity},
      {"discriminator-logit-gap", logit_gap},
      {"anomaly-auroc", anomaly_auroc},
      {"cpc-separation", cpc_separation},
      {"lambda-sweep", lambda_sweep},
      {"determinism-audit", determinism_audit},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0, ran = 0;
  for (const auto &c : criteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    ++ran;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception &e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS " : "FAIL ") << c.name << ": " << v.detail << std::endl;
  }
  std::cout << ran - failed << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
