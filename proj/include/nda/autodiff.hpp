#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "nda/image.hpp"
#include "nda/rng.hpp"

namespace nda {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor with an accumulated gradient of the same shape.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(); }
};

/// Handle to a node recorded on a Tape.
struct Var {
  int id = -1;
};

/// Append-only reverse-mode tape over matrix-valued nodes.
///
/// Nodes are stored in creation order, which is a topological order. backward()
/// sweeps once in reverse, accumulating into Parameter::grad for every trainable
/// parameter node; a second backward() without reset() throws ArgumentError.
class Tape {
public:
  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var input(Matrix value, bool requires_grad = false);
  Var scalar(double value);
  /// Leaf bound to p. With trainable = false the value is used but no gradient reaches p.
  Var parameter(Parameter &p, bool trainable = true);

  Var matmul(Var a, Var b);            // a b
  Var matmul_nt(Var a, Var b);         // a b^T
  Var add_row(Var x, Var row);         // x + broadcast row vector
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);               // elementwise
  Var scale(Var a, double s);
  Var shift(Var a, double s);
  Var relu(Var a);
  Var leaky_relu(Var a, double slope);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);                 // log(1 + e^a), stable
  Var square(Var a);
  Var sum(Var a);                      // 1 x 1
  Var mean(Var a);                     // 1 x 1
  Var normalize_rows(Var a);           // each row divided by its L2 norm
  Var concat_cols(Var a, Var b);
  Var concat_rows(Var a, Var b);
  /// out(i, k) = <a_i, z_{i*m + k}> for a: n x d, z: (n*m) x d.
  Var group_dot(Var a, Var z, int m);
  /// mean_i (logsumexp_j L(i, j) - L(i, i)) for an n x K logit matrix, K >= n.
  Var diag_cross_entropy(Var logits);

  const Matrix &value(Var v) const;
  double scalar_value(Var v) const;
  const Matrix &adjoint(Var v) const;

  void backward(Var loss);
  void reset();

  std::size_t size() const noexcept { return nodes_.size(); }
  bool backward_done() const noexcept { return backward_done_; }

private:
  enum class Op {
    Input, Param, MatMul, MatMulNT, AddRow, Add, Sub, Mul, Scale, Shift, Relu, LeakyRelu,
    Tanh, Sigmoid, Softplus, Square, Sum, Mean, NormalizeRows, ConcatCols, ConcatRows,
    GroupDot, DiagCrossEntropy
  };
  struct Node {
    explicit Node(Op o, int lhs = -1, int rhs = -1) : op(o), a(lhs), b(rhs) {}
    Op op;
    int a = -1;
    int b = -1;
    double s = 0.0;
    int m = 0;
    bool requires_grad = false;
    Parameter *param = nullptr;  // Param nodes: value referenced, not copied
    Matrix value;
    Matrix aux;                  // per-op cache (row norms, softmax)
  };

  Var push(Node node);
  const Node &node(Var v) const;
  bool needs(int id) const { return id >= 0 && nodes_[static_cast<std::size_t>(id)].requires_grad; }
  Matrix &grad_slot(int id);

  std::vector<Node> nodes_;
  std::vector<Matrix> adjoints_;
  bool backward_done_ = false;
};

enum class Activation { Identity, ReLU, Tanh, LeakyReLU, Sigmoid, ScaledTanh };

/// Architecture of a fully connected network. ScaledTanh maps to [0, 1] via (tanh + 1) / 2.
struct MlpSpec {
  std::vector<int> layer_sizes;
  Activation hidden = Activation::LeakyReLU;
  Activation output = Activation::Identity;
  double leaky_slope = 0.2;
};

/// Multilayer perceptron: x -> act(x W_0 + b_0) -> ... -> out(x W_L + b_L).
/// Weights are in x out; initialization is He-uniform, U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
/// with zero biases.
class Mlp {
public:
  Mlp(MlpSpec spec, std::vector<Parameter> weights, std::vector<Parameter> biases);
  static Mlp init(MlpSpec spec, Rng &rng, const std::string &prefix);

  const MlpSpec &spec() const noexcept { return spec_; }
  int input_size() const { return spec_.layer_sizes.front(); }
  int output_size() const { return spec_.layer_sizes.back(); }

  /// Records the batched forward pass on tape. x is batch x input_size.
  Var forward(Tape &tape, Var x, bool trainable = true);
  /// Inference without a tape.
  Matrix predict(const Matrix &x) const;

  std::vector<Parameter *> parameters();
  std::vector<const Parameter *> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();
  bool all_finite() const;

  const std::vector<Parameter> &weights() const noexcept { return weights_; }
  const std::vector<Parameter> &biases() const noexcept { return biases_; }

  friend bool operator==(const Mlp &a, const Mlp &b);

private:
  MlpSpec spec_;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

/// TensorView front end over Mlp::forward; throws DimensionError on a width mismatch.
TensorView forward(Mlp &mlp, const TensorView &x, Tape &tape);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moments for one parameter.
struct AdamSlot {
  Matrix m;
  Matrix v;
  long t = 0;
};

/// One bias-corrected Adam update of p from p.grad. Throws PoisonedGradientError
/// (naming p) if the gradient contains a NaN.
void adam_step(Parameter &p, AdamSlot &slot, const AdamConfig &cfg);

/// Adam over a fixed parameter list.
class Adam {
public:
  Adam(std::vector<Parameter *> params, AdamConfig cfg);
  void step();
  void zero_grad();
  const AdamConfig &config() const noexcept { return cfg_; }
  const std::vector<AdamSlot> &slots() const noexcept { return slots_; }

private:
  std::vector<Parameter *> params_;
  std::vector<AdamSlot> slots_;
  AdamConfig cfg_;
};

} // namespace nda
