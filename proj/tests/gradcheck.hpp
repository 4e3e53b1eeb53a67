#pragma once

// Central-difference gradient oracle shared by the autodiff unit tests and the
// acceptance run.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nda/autodiff.hpp"
#include "nda/cpc.hpp"
#include "nda/gan.hpp"
#include "nda/rng.hpp"

namespace nda::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  long checked = 0;
  std::string worst;  // "param[index]" of the largest error
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// entries that are zero up to roundoff from dividing by noise.
inline double relative_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

using LossBuilder = std::function<Var(Tape &)>;
// Recomputes the same loss from the current parameter values without the tape.
using LossOracle = std::function<long double()>;

/// Backpropagates build() once, then compares up to max_entries randomly chosen
/// entries of every parameter against (L(w + h) - L(w - h)) / 2h, with L from
/// the oracle. A long double oracle keeps the difference quotient's roundoff
/// (about eps * |L| / h) well under the tolerance for gradients near 1e-6.
inline GradCheck gradcheck(const LossBuilder &build, const LossOracle &oracle,
                           const std::vector<Parameter *> &params, Rng &rng, int max_entries = 40,
                           double h = 1e-5) {
  for (auto *p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(build(tape));
  }
  GradCheck out;
  for (auto *p : params) {
    const int size = static_cast<int>(p->value.size());
    std::vector<int> idx = random_permutation(rng, size);
    if (size > max_entries) idx.resize(static_cast<std::size_t>(max_entries));
    for (int i : idx) {
      double &w = p->value.data()[i];
      const double saved = w;
      w = saved + h;
      const long double up = oracle();
      const double h_up = w - saved;  // the step actually taken
      w = saved - h;
      const long double down = oracle();
      const double h_down = saved - w;
      w = saved;
      const double numeric = static_cast<double>((up - down) / (static_cast<long double>(h_up) + h_down));
      const double err = relative_error(p->grad.data()[i], numeric);
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = p->name + "[" + std::to_string(i) + "] analytic " + std::to_string(p->grad.data()[i]) +
                    " numeric " + std::to_string(numeric);
      }
    }
  }
  return out;
}

// ---- long double reference forward pass

using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline LMat widen(const Matrix &m) { return m.cast<long double>(); }

inline long double activate(long double v, Activation a, double leaky) {
  switch (a) {
  case Activation::Identity: return v;
  case Activation::ReLU: return v > 0 ? v : 0.0L;
  case Activation::LeakyReLU: return v > 0 ? v : static_cast<long double>(leaky) * v;
  case Activation::Tanh: return std::tanh(v);
  case Activation::Sigmoid: return 1.0L / (1.0L + std::exp(-v));
  case Activation::ScaledTanh: return (std::tanh(v) + 1.0L) / 2.0L;
  }
  return v;
}

inline LMat reference_forward(const Mlp &net, LMat x) {
  const auto &w = net.weights();
  for (std::size_t l = 0; l < w.size(); ++l) {
    LMat y = x * widen(w[l].value);
    y.rowwise() += widen(net.biases()[l].value).row(0);
    const auto act = l + 1 == w.size() ? net.spec().output : net.spec().hidden;
    for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = activate(y.data()[k], act, net.spec().leaky_slope);
    x = std::move(y);
  }
  return x;
}

inline long double softplus_l(long double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

inline LMat unit_rows_l(LMat x) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) /= std::sqrt(x.row(i).squaredNorm());
  return x;
}

// -mean_i log[(n+m) g_ii / (sum_j g_ij + sum_k g(a_i, z_ik))], g(a, z) = exp(<a W, z> / tau).
inline long double reference_contrastive(const LMat &a, const LMat &p, const LMat &z, int m, long double tau,
                                         const LMat *w) {
  const LMat aw = w ? LMat(a * *w) : a;
  const auto n = a.rows();
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < n; ++i) {
    long double denom = 0.0L;
    for (Eigen::Index j = 0; j < n; ++j) denom += std::exp(aw.row(i).dot(p.row(j)) / tau);
    for (int k = 0; k < m; ++k) denom += std::exp(aw.row(i).dot(z.row(i * m + k)) / tau);
    total -= std::log(static_cast<long double>(n + m) * std::exp(aw.row(i).dot(p.row(i)) / tau) / denom);
  }
  return total / static_cast<long double>(n);
}

inline Matrix random_matrix(int rows, int cols, Rng &rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

// Smooth activations only: a central difference straddling a ReLU kink measures
// the kink, not the derivative.
inline Activation random_smooth_activation(Rng &rng) {
  static const Activation acts[] = {Activation::Tanh, Activation::Sigmoid, Activation::ScaledTanh,
                                    Activation::Identity};
  return acts[rng.below(4)];
}

inline MlpSpec random_spec(int in, int out, Rng &rng, Activation output = Activation::Identity) {
  MlpSpec spec;
  spec.layer_sizes.push_back(in);
  const int hidden_layers = static_cast<int>(rng.below(3));  // 1..3 weight layers
  for (int l = 0; l < hidden_layers; ++l) spec.layer_sizes.push_back(2 + static_cast<int>(rng.below(63)));
  spec.layer_sizes.push_back(out);
  spec.hidden = random_smooth_activation(rng);
  spec.output = output;
  return spec;
}

enum class ComboKind {
  SumSigmoid,
  MeanSquare,
  DiscriminatorLoss,
  GeneratorLoss,
  CpcLoss,
  NdaCpcLoss,
  NdaCpcCritic,
  kCount
};

inline const char *combo_name(ComboKind k) {
  switch (k) {
  case ComboKind::SumSigmoid: return "sum-sigmoid";
  case ComboKind::MeanSquare: return "mean-square";
  case ComboKind::DiscriminatorLoss: return "gan-discriminator";
  case ComboKind::GeneratorLoss: return "gan-generator";
  case ComboKind::CpcLoss: return "cpc";
  case ComboKind::NdaCpcLoss: return "nda-cpc";
  case ComboKind::NdaCpcCritic: return "nda-cpc-critic";
  default: return "?";
  }
}

/// One random network/loss pair of the given kind, checked against central differences.
inline GradCheck random_combo(ComboKind kind, Rng &rng) {
  const int in = 2 + static_cast<int>(rng.below(12));
  const int batch = 2 + static_cast<int>(rng.below(6));
  switch (kind) {
  case ComboKind::SumSigmoid: {
    Mlp net = Mlp::init(random_spec(in, 1 + static_cast<int>(rng.below(4)), rng), rng, "net");
    const Matrix x = random_matrix(batch, in, rng);
    return gradcheck([&](Tape &t) { return t.sum(t.sigmoid(net.forward(t, t.input(x)))); },
                     [&] {
                       long double s = 0.0L;
                       for (long double v : reference_forward(net, widen(x)).reshaped()) s += 1.0L / (1.0L + std::exp(-v));
                       return s;
                     },
                     net.parameters(), rng);
  }
  case ComboKind::MeanSquare: {
    Mlp net = Mlp::init(random_spec(in, 3, rng), rng, "net");
    const Matrix x = random_matrix(batch, in, rng), y = random_matrix(batch, 3, rng);
    return gradcheck(
        [&](Tape &t) { return t.mean(t.square(t.sub(net.forward(t, t.input(x)), t.input(y)))); },
        [&] {
          const LMat r = reference_forward(net, widen(x)) - widen(y);
          return r.squaredNorm() / static_cast<long double>(r.size());
        },
        net.parameters(), rng);
  }
  case ComboKind::DiscriminatorLoss: {
    Mlp d = Mlp::init(random_spec(in, 1, rng), rng, "D");
    const Matrix real = random_matrix(batch, in, rng), fake = random_matrix(batch + 1, in, rng);
    return gradcheck(
        [&](Tape &t) {
          return discriminator_loss(t, d.forward(t, t.input(real)), d.forward(t, t.input(fake)));
        },
        [&] {
          long double r = 0.0L, f = 0.0L;
          for (long double v : reference_forward(d, widen(real)).reshaped()) r += softplus_l(-v);
          for (long double v : reference_forward(d, widen(fake)).reshaped()) f += softplus_l(v);
          return r / real.rows() + f / fake.rows() - 2.0L * std::log(2.0L);
        },
        d.parameters(), rng);
  }
  case ComboKind::GeneratorLoss: {
    const int latent = 2 + static_cast<int>(rng.below(6));
    Mlp g = Mlp::init(random_spec(latent, in, rng, Activation::ScaledTanh), rng, "G");
    Mlp d = Mlp::init(random_spec(in, 1, rng), rng, "D");
    const Matrix z = random_matrix(batch, latent, rng);
    // D is frozen: only the generator's parameters receive gradient.
    return gradcheck(
        [&](Tape &t) { return generator_loss(t, d.forward(t, g.forward(t, t.input(z)), false)); },
        [&] {
          long double s = 0.0L;
          for (long double v : reference_forward(d, reference_forward(g, widen(z))).reshaped()) s += softplus_l(-v);
          return s / z.rows();
        },
        g.parameters(), rng);
  }
  case ComboKind::CpcLoss:
  case ComboKind::NdaCpcLoss:
  case ComboKind::NdaCpcCritic: {
    const int embed = 2 + static_cast<int>(rng.below(8));
    const int m = kind == ComboKind::CpcLoss ? 0 : 1 + static_cast<int>(rng.below(4));
    const double tau = 0.05 + rng.uniform();
    Mlp enc = Mlp::init(random_spec(in, embed, rng), rng, "enc");
    const Matrix xa = random_matrix(batch, in, rng), xp = random_matrix(batch, in, rng);
    const Matrix xz = random_matrix(batch * std::max(m, 1), in, rng);
    Parameter critic("W", Matrix::Identity(embed, embed) + random_matrix(embed, embed, rng, 0.1));
    const bool use_critic = kind == ComboKind::NdaCpcCritic;
    auto params = enc.parameters();
    if (use_critic) params.push_back(&critic);
    return gradcheck(
        [&](Tape &t) {
          auto code = [&](const Matrix &x) { return t.normalize_rows(enc.forward(t, t.input(x))); };
          std::optional<Var> nda;
          if (m > 0) nda = code(xz);
          std::optional<Var> w;
          if (use_critic) w = t.parameter(critic);
          return contrastive_loss(t, code(xa), code(xp), nda, m, tau, w);
        },
        [&] {
          auto code = [&](const Matrix &x) { return unit_rows_l(reference_forward(enc, widen(x))); };
          const LMat wl = widen(critic.value);
          return reference_contrastive(code(xa), code(xp), code(xz), m, tau, use_critic ? &wl : nullptr);
        },
        params, rng);
  }
  default: return {};
  }
}

} // namespace nda::testing
