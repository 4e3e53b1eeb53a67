#include "nda/autodiff.hpp"

#include <cmath>
#include <string>

#include "nda/error.hpp"

namespace nda {
namespace {

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace

Var Tape::push(Node node) {
  if (backward_done_) throw ArgumentError("tape already differentiated; call reset() first");
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node &Tape::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ArgumentError("variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Matrix &Tape::value(Var v) const {
  const auto &n = node(v);
  return n.param != nullptr ? n.param->value : n.value;
}

double Tape::scalar_value(Var v) const {
  const auto &m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw ArgumentError("node is not a scalar");
  return m(0, 0);
}

const Matrix &Tape::adjoint(Var v) const {
  node(v);
  if (!backward_done_) throw ArgumentError("adjoints are only available after backward()");
  return adjoints_[static_cast<std::size_t>(v.id)];
}

Var Tape::input(Matrix value, bool requires_grad) {
  Node n{Op::Input};
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::scalar(double value) { return input(Matrix::Constant(1, 1, value)); }

Var Tape::parameter(Parameter &p, bool trainable) {
  Node n{Op::Param};
  n.param = &p;
  n.requires_grad = trainable;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const auto &va = value(a);
  const auto &vb = value(b);
  if (va.cols() != vb.rows()) {
    throw DimensionError("matmul: " + std::to_string(va.rows()) + "x" + std::to_string(va.cols()) +
                         " times " + std::to_string(vb.rows()) + "x" + std::to_string(vb.cols()));
  }
  Node n{Op::MatMul, a.id, b.id};
  n.value.noalias() = va * vb;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
  const auto &va = value(a);
  const auto &vb = value(b);
  if (va.cols() != vb.cols()) throw DimensionError("matmul_nt: inner dimensions differ");
  Node n{Op::MatMulNT, a.id, b.id};
  n.value.noalias() = va * vb.transpose();
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::add_row(Var x, Var row) {
  const auto &vx = value(x);
  const auto &vr = value(row);
  if (vr.rows() != 1 || vr.cols() != vx.cols()) throw DimensionError("add_row: shape mismatch");
  Node n{Op::AddRow, x.id, row.id};
  n.value = vx.rowwise() + vr.row(0);
  n.requires_grad = needs(x.id) || needs(row.id);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const auto &va = value(a);
  const auto &vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) throw DimensionError("add: shape mismatch");
  Node n{Op::Add, a.id, b.id};
  n.value = va + vb;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const auto &va = value(a);
  const auto &vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) throw DimensionError("sub: shape mismatch");
  Node n{Op::Sub, a.id, b.id};
  n.value = va - vb;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const auto &va = value(a);
  const auto &vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) throw DimensionError("mul: shape mismatch");
  Node n{Op::Mul, a.id, b.id};
  n.value = va.cwiseProduct(vb);
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n{Op::Scale, a.id};
  n.s = s;
  n.value = value(a) * s;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::shift(Var a, double s) {
  Node n{Op::Shift, a.id};
  n.s = s;
  n.value = value(a).array() + s;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n{Op::Relu, a.id};
  n.value = value(a).cwiseMax(0.0);
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double slope) {
  Node n{Op::LeakyRelu, a.id};
  n.s = slope;
  n.value = value(a).unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n{Op::Tanh, a.id};
  n.value = value(a).array().tanh();
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n{Op::Sigmoid, a.id};
  n.value = value(a).unaryExpr([](double x) { return sigmoid_scalar(x); });
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  Node n{Op::Softplus, a.id};
  n.value = value(a).unaryExpr([](double x) { return softplus_scalar(x); });
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::square(Var a) {
  Node n{Op::Square, a.id};
  n.value = value(a).array().square();
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n{Op::Sum, a.id};
  n.value = Matrix::Constant(1, 1, value(a).sum());
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  const auto &va = value(a);
  if (va.size() == 0) throw DimensionError("mean of an empty node");
  Node n{Op::Mean, a.id};
  n.value = Matrix::Constant(1, 1, va.sum() / static_cast<double>(va.size()));
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::normalize_rows(Var a) {
  const auto &va = value(a);
  Node n{Op::NormalizeRows, a.id};
  n.aux = va.rowwise().norm().cwiseMax(1e-12);
  n.value = va.array().colwise() / n.aux.col(0).array();
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
  const auto &va = value(a);
  const auto &vb = value(b);
  if (va.rows() != vb.rows()) throw DimensionError("concat_cols: row counts differ");
  Node n{Op::ConcatCols, a.id, b.id};
  n.value.resize(va.rows(), va.cols() + vb.cols());
  n.value << va, vb;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::concat_rows(Var a, Var b) {
  const auto &va = value(a);
  const auto &vb = value(b);
  if (va.cols() != vb.cols()) throw DimensionError("concat_rows: column counts differ");
  Node n{Op::ConcatRows, a.id, b.id};
  n.value.resize(va.rows() + vb.rows(), va.cols());
  n.value << va, vb;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::group_dot(Var a, Var z, int m) {
  const auto &va = value(a);
  const auto &vz = value(z);
  if (m <= 0 || va.cols() != vz.cols() || vz.rows() != va.rows() * m) {
    throw DimensionError("group_dot: expected z with rows = rows(a) * m");
  }
  Node n{Op::GroupDot, a.id, z.id};
  n.m = m;
  n.value.resize(va.rows(), m);
  for (Eigen::Index i = 0; i < va.rows(); ++i)
    for (int k = 0; k < m; ++k) n.value(i, k) = va.row(i).dot(vz.row(i * m + k));
  n.requires_grad = needs(a.id) || needs(z.id);
  return push(std::move(n));
}

Var Tape::diag_cross_entropy(Var logits) {
  const auto &L = value(logits);
  if (L.rows() == 0 || L.cols() < L.rows()) throw DimensionError("diag_cross_entropy needs cols >= rows");
  Node n{Op::DiagCrossEntropy, logits.id};
  n.aux.resize(L.rows(), L.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const double mx = L.row(i).maxCoeff();
    const auto shifted = (L.row(i).array() - mx).exp();
    const double z = shifted.sum();
    n.aux.row(i) = shifted / z;
    total += mx + std::log(z) - L(i, i);
  }
  n.value = Matrix::Constant(1, 1, total / static_cast<double>(L.rows()));
  n.requires_grad = needs(logits.id);
  return push(std::move(n));
}

Matrix &Tape::grad_slot(int id) {
  auto &g = adjoints_[static_cast<std::size_t>(id)];
  if (g.size() == 0) {
    const auto &v = value(Var{id});
    g = Matrix::Zero(v.rows(), v.cols());
  }
  return g;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw ArgumentError("backward() called twice on the same tape; call reset() first");
  const auto &lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw ArgumentError("backward() needs a scalar loss node");
  adjoints_.assign(nodes_.size(), Matrix());
  backward_done_ = true;
  grad_slot(loss.id)(0, 0) = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    auto &nd = nodes_[static_cast<std::size_t>(id)];
    if (!nd.requires_grad) continue;
    const Matrix &g = adjoints_[static_cast<std::size_t>(id)];
    if (g.size() == 0) continue;
    const int a = nd.a, b = nd.b;
    switch (nd.op) {
    case Op::Input:
      break;
    case Op::Param:
      nd.param->grad += g;
      break;
    case Op::MatMul:
      if (needs(a)) grad_slot(a).noalias() += g * value(Var{b}).transpose();
      if (needs(b)) grad_slot(b).noalias() += value(Var{a}).transpose() * g;
      break;
    case Op::MatMulNT:
      if (needs(a)) grad_slot(a).noalias() += g * value(Var{b});
      if (needs(b)) grad_slot(b).noalias() += g.transpose() * value(Var{a});
      break;
    case Op::AddRow:
      if (needs(a)) grad_slot(a) += g;
      if (needs(b)) grad_slot(b) += g.colwise().sum();
      break;
    case Op::Add:
      if (needs(a)) grad_slot(a) += g;
      if (needs(b)) grad_slot(b) += g;
      break;
    case Op::Sub:
      if (needs(a)) grad_slot(a) += g;
      if (needs(b)) grad_slot(b) -= g;
      break;
    case Op::Mul:
      if (needs(a)) grad_slot(a) += g.cwiseProduct(value(Var{b}));
      if (needs(b)) grad_slot(b) += g.cwiseProduct(value(Var{a}));
      break;
    case Op::Scale:
      grad_slot(a) += g * nd.s;
      break;
    case Op::Shift:
      grad_slot(a) += g;
      break;
    case Op::Relu:
      grad_slot(a).array() += g.array() * (value(Var{a}).array() > 0.0).cast<double>();
      break;
    case Op::LeakyRelu: {
      const double slope = nd.s;
      grad_slot(a).array() +=
          g.array() * value(Var{a}).unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; }).array();
      break;
    }
    case Op::Tanh:
      grad_slot(a).array() += g.array() * (1.0 - nd.value.array().square());
      break;
    case Op::Sigmoid:
      grad_slot(a).array() += g.array() * nd.value.array() * (1.0 - nd.value.array());
      break;
    case Op::Softplus:
      grad_slot(a).array() +=
          g.array() * value(Var{a}).unaryExpr([](double x) { return sigmoid_scalar(x); }).array();
      break;
    case Op::Square:
      grad_slot(a).array() += 2.0 * g.array() * value(Var{a}).array();
      break;
    case Op::Sum:
      grad_slot(a).array() += g(0, 0);
      break;
    case Op::Mean: {
      const auto &va = value(Var{a});
      grad_slot(a).array() += g(0, 0) / static_cast<double>(va.size());
      break;
    }
    case Op::NormalizeRows: {
      // dx = (dy - y <y, dy>) / |x|
      const Matrix &y = nd.value;
      const Eigen::VectorXd proj = (y.array() * g.array()).rowwise().sum();
      Matrix dx = g - (y.array().colwise() * proj.array()).matrix();
      dx.array().colwise() /= nd.aux.col(0).array();
      grad_slot(a) += dx;
      break;
    }
    case Op::ConcatCols: {
      const auto ca = value(Var{a}).cols();
      if (needs(a)) grad_slot(a) += g.leftCols(ca);
      if (needs(b)) grad_slot(b) += g.rightCols(g.cols() - ca);
      break;
    }
    case Op::ConcatRows: {
      const auto ra = value(Var{a}).rows();
      if (needs(a)) grad_slot(a) += g.topRows(ra);
      if (needs(b)) grad_slot(b) += g.bottomRows(g.rows() - ra);
      break;
    }
    case Op::GroupDot: {
      const auto &va = value(Var{a});
      const auto &vz = value(Var{b});
      const int m = nd.m;
      if (needs(a)) {
        auto &ga = grad_slot(a);
        for (Eigen::Index i = 0; i < va.rows(); ++i)
          for (int k = 0; k < m; ++k) ga.row(i) += g(i, k) * vz.row(i * m + k);
      }
      if (needs(b)) {
        auto &gz = grad_slot(b);
        for (Eigen::Index i = 0; i < va.rows(); ++i)
          for (int k = 0; k < m; ++k) gz.row(i * m + k) += g(i, k) * va.row(i);
      }
      break;
    }
    case Op::DiagCrossEntropy: {
      const double w = g(0, 0) / static_cast<double>(nd.aux.rows());
      auto &ga = grad_slot(a);
      ga += w * nd.aux;
      for (Eigen::Index i = 0; i < nd.aux.rows(); ++i) ga(i, i) -= w;
      break;
    }
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  adjoints_.clear();
  backward_done_ = false;
}

Mlp::Mlp(MlpSpec spec, std::vector<Parameter> weights, std::vector<Parameter> biases)
    : spec_(std::move(spec)), weights_(std::move(weights)), biases_(std::move(biases)) {
  const auto &sizes = spec_.layer_sizes;
  if (sizes.size() < 2) throw ArgumentError("mlp needs at least an input and an output size");
  for (int s : sizes) {
    if (s <= 0) throw ArgumentError("mlp layer sizes must be positive");
  }
  if (weights_.size() != sizes.size() - 1 || biases_.size() != weights_.size()) {
    throw DimensionError("mlp parameter count does not match layer sizes");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].value.rows() != sizes[l] || weights_[l].value.cols() != sizes[l + 1] ||
        biases_[l].value.rows() != 1 || biases_[l].value.cols() != sizes[l + 1]) {
      throw DimensionError("mlp layer " + std::to_string(l) + " has inconsistent shapes");
    }
  }
}

Mlp Mlp::init(MlpSpec spec, Rng &rng, const std::string &prefix) {
  std::vector<Parameter> weights, biases;
  const auto &sizes = spec.layer_sizes;
  if (sizes.size() < 2) throw ArgumentError("mlp needs at least an input and an output size");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(sizes[l]));
    Matrix w(sizes[l], sizes[l + 1]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    weights.emplace_back(prefix + ".W" + std::to_string(l), std::move(w));
    biases.emplace_back(prefix + ".b" + std::to_string(l), Matrix::Zero(1, sizes[l + 1]));
  }
  return Mlp(std::move(spec), std::move(weights), std::move(biases));
}

namespace {

Var apply_activation(Tape &tape, Var x, Activation act, double slope) {
  switch (act) {
  case Activation::Identity: return x;
  case Activation::ReLU: return tape.relu(x);
  case Activation::Tanh: return tape.tanh(x);
  case Activation::LeakyReLU: return tape.leaky_relu(x, slope);
  case Activation::Sigmoid: return tape.sigmoid(x);
  case Activation::ScaledTanh: return tape.scale(tape.shift(tape.tanh(x), 1.0), 0.5);
  }
  return x;
}

void apply_activation_inplace(Matrix &x, Activation act, double slope) {
  switch (act) {
  case Activation::Identity: return;
  case Activation::ReLU: x = x.cwiseMax(0.0); return;
  case Activation::Tanh: x = x.array().tanh(); return;
  case Activation::LeakyReLU: x = x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; }); return;
  case Activation::Sigmoid: x = x.unaryExpr([](double v) { return sigmoid_scalar(v); }); return;
  case Activation::ScaledTanh: x = ((x.array().tanh() + 1.0) * 0.5).matrix(); return;
  }
}

} // namespace

Var Mlp::forward(Tape &tape, Var x, bool trainable) {
  if (tape.value(x).cols() != input_size()) {
    throw DimensionError("mlp input has " + std::to_string(tape.value(x).cols()) +
                         " features, expected " + std::to_string(input_size()));
  }
  Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = tape.matmul(h, tape.parameter(weights_[l], trainable));
    h = tape.add_row(h, tape.parameter(biases_[l], trainable));
    const bool last = l + 1 == weights_.size();
    h = apply_activation(tape, h, last ? spec_.output : spec_.hidden, spec_.leaky_slope);
  }
  return h;
}

Matrix Mlp::predict(const Matrix &x) const {
  if (x.cols() != input_size()) throw DimensionError("mlp input width mismatch");
  Matrix h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix next(h.rows(), weights_[l].value.cols());
    next.noalias() = h * weights_[l].value;
    next.rowwise() += biases_[l].value.row(0);
    const bool last = l + 1 == weights_.size();
    apply_activation_inplace(next, last ? spec_.output : spec_.hidden, spec_.leaky_slope);
    h = std::move(next);
  }
  return h;
}

std::vector<Parameter *> Mlp::parameters() {
  std::vector<Parameter *> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Parameter *> Mlp::parameters() const {
  std::vector<const Parameter *> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto *p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void Mlp::zero_grad() {
  for (auto *p : parameters()) p->zero_grad();
}

bool Mlp::all_finite() const {
  for (const auto *p : parameters()) {
    if (!p->value.allFinite()) return false;
  }
  return true;
}

bool operator==(const Mlp &a, const Mlp &b) {
  if (a.spec_.layer_sizes != b.spec_.layer_sizes || a.spec_.hidden != b.spec_.hidden ||
      a.spec_.output != b.spec_.output || a.spec_.leaky_slope != b.spec_.leaky_slope) {
    return false;
  }
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value != pb[i]->value) return false;
  }
  return true;
}

TensorView forward(Mlp &mlp, const TensorView &x, Tape &tape) {
  if (x.cols() != mlp.input_size()) {
    throw DimensionError("tensor has " + std::to_string(x.cols()) + " features, mlp expects " +
                         std::to_string(mlp.input_size()));
  }
  Matrix in = Eigen::Map<const Matrix>(x.data().data(), x.rows(), x.cols());
  const Var out = mlp.forward(tape, tape.input(std::move(in)));
  const Matrix &v = tape.value(out);
  std::vector<int> shape = x.shape();
  shape.back() = static_cast<int>(v.cols());
  return TensorView(std::move(shape), std::vector<double>(v.data(), v.data() + v.size()));
}

void adam_step(Parameter &p, AdamSlot &slot, const AdamConfig &cfg) {
  if (p.grad.hasNaN()) throw PoisonedGradientError(p.name, "NaN gradient in parameter " + p.name);
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
    throw DimensionError("gradient shape differs from parameter " + p.name);
  }
  if (slot.m.size() == 0) {
    slot.m = Matrix::Zero(p.value.rows(), p.value.cols());
    slot.v = Matrix::Zero(p.value.rows(), p.value.cols());
  }
  slot.t += 1;
  slot.m = cfg.beta1 * slot.m + (1.0 - cfg.beta1) * p.grad;
  slot.v = cfg.beta2 * slot.v + (1.0 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(slot.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(slot.t));
  p.value.array() -= cfg.lr * (slot.m.array() / c1) / ((slot.v.array() / c2).sqrt() + cfg.eps);
}

Adam::Adam(std::vector<Parameter *> params, AdamConfig cfg)
    : params_(std::move(params)), slots_(params_.size()), cfg_(cfg) {}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], slots_[i], cfg_);
}

void Adam::zero_grad() {
  for (auto *p : params_) p->zero_grad();
}

} // namespace nda
