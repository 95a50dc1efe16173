#pragma once

#include "cog/types.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cog {

struct Param {
  std::string name;
  Matrix value;
  bool decayed = true;  ///< weight decay applies (weights yes, biases no)
};

/// Ordered named parameter tensors. Biases are stored as 1 x out rows.
struct ParamSet {
  std::vector<Param> items;

  std::size_t size() const { return items.size(); }
  Param& operator[](std::size_t i) { return items[i]; }
  const Param& operator[](std::size_t i) const { return items[i]; }
  const Param* find(const std::string& name) const;

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  bool all_finite() const;
  friend bool operator==(const ParamSet& a, const ParamSet& b);
};

struct LayerSpec {
  Index in_dim = 0;
  Index out_dim = 0;
  bool bias = true;
};

/// Glorot-uniform weights in +-sqrt(6 / (in + out)), zero biases.
/// Names are W0, b0, W1, b1, ...
ParamSet init_params(std::span<const LayerSpec> plan, Seed seed);

enum class Optimizer { Adam, Sgd };

struct TrainHyper {
  double learning_rate = 0.01;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  int epochs = 200;
  Seed seed = 0;
  Optimizer optimizer = Optimizer::Adam;

  void validate() const;
};

/// Row-wise softmax with max shift.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out = logits;
  for (Index r = 0; r < out.rows(); ++r) {
    out.row(r).array() -= out.row(r).maxCoeff();
    out.row(r) = out.row(r).array().exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;  ///< d loss / d logits; zero outside the mask
};

/// Mean negative log-likelihood of `targets[row]` over the rows in `mask`.
LossAndGrad softmax_xent(const Matrix& logits, std::span<const int> targets, std::span<const Index> mask);

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long step = 0;
};

/// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8). Weight decay enters the
/// gradient as weight_decay * W for decayed parameters.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const TrainHyper& hyper);
void sgd_step(ParamSet& params, const ParamSet& grads, const TrainHyper& hyper);

// ---- layered network -----------------------------------------------------------

/// Model input. Sparse inputs (e.g. bag-of-words) keep a compressed copy for
/// the first matrix product.
class FeatureInput {
 public:
  explicit FeatureInput(Matrix dense);

  const Matrix& dense() const { return dense_; }
  bool is_sparse() const { return sparse_ != nullptr; }
  Index rows() const { return dense_.rows(); }
  Index cols() const { return dense_.cols(); }

  Matrix times(const Matrix& w) const;            // X W
  Matrix transpose_times(const Matrix& g) const;  // X^T G

 private:
  Matrix dense_;
  std::shared_ptr<const SparseMatrix> sparse_;
};

enum class Activation { None, Relu, Tanh };

/// One layer: optional dropout on the input, H W (+ b), optionally
/// left-multiplied by the propagation operator, then the activation.
struct LayerPlan {
  Index in_dim = 0;
  Index out_dim = 0;
  bool bias = true;
  bool propagate = false;
  Activation activation = Activation::None;
  double dropout = 0.0;
};

class Network {
 public:
  struct Cache {
    std::vector<Matrix> inputs;       // layer input after dropout (layers > 0)
    std::vector<Matrix> masks;        // inverted-dropout masks, empty when unused
    std::vector<Matrix> activations;  // layer outputs
    std::vector<Matrix> preact;       // before the activation
  };

  Network() = default;
  Network(std::vector<LayerPlan> layers, std::shared_ptr<const SparseMatrix> propagation);

  const std::vector<LayerPlan>& layers() const { return layers_; }
  std::vector<LayerSpec> param_plan() const;

  /// Training mode iff `dropout_rng` is non-null.
  Matrix forward(const FeatureInput& x, const ParamSet& params, Cache* cache = nullptr,
                 std::mt19937_64* dropout_rng = nullptr) const;

  /// Reverse pass from d loss / d output. Fills `grad_input` with d loss / d X when non-null.
  ParamSet backward(const FeatureInput& x, const ParamSet& params, const Cache& cache, const Matrix& grad_output,
                    Matrix* grad_input = nullptr) const;

 private:
  std::vector<LayerPlan> layers_;
  std::shared_ptr<const SparseMatrix> propagation_;
};

// ---- gradient oracle -----------------------------------------------------------

struct GradCheck {
  double max_relative_error = 0.0;
  std::string worst_param;
  Index probes = 0;
};

/// Central differences of `loss` around `params`, compared entrywise with
/// `analytic`. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheck finite_diff_check(const std::function<double(const ParamSet&)>& loss, const ParamSet& params,
                            const ParamSet& analytic, double eps);

// ---- checkpoints ---------------------------------------------------------------

/// One line per tensor: name,rows,cols,v00,v01,... (row-major).
void write_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet read_checkpoint(const std::filesystem::path& path);

}  // namespace cog
