#include "cog/nn.hpp"

#include "cog/io.hpp"

#include <cmath>
#include <sstream>

namespace cog {

const Param* ParamSet::find(const std::string& name) const {
  for (const auto& p : items)
    if (p.name == name) return &p;
  return nullptr;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& p : items) out.items.push_back({p.name, Matrix::Zero(p.value.rows(), p.value.cols()), p.decayed});
  return out;
}

bool ParamSet::all_finite() const {
  for (const auto& p : items)
    if (!p.value.allFinite()) return false;
  return true;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.name != y.name || x.decayed != y.decayed || x.value.rows() != y.value.rows() ||
        x.value.cols() != y.value.cols() || x.value != y.value)
      return false;
  }
  return true;
}

ParamSet init_params(std::span<const LayerSpec> plan, Seed seed) {
  std::mt19937_64 rng(seed);
  ParamSet out;
  for (std::size_t l = 0; l < plan.size(); ++l) {
    const auto& layer = plan[l];
    if (layer.in_dim < 1 || layer.out_dim < 1) throw ValidationError("layer dimensions must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in_dim + layer.out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(layer.in_dim, layer.out_dim);
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    out.items.push_back({"W" + std::to_string(l), std::move(w), true});
    if (layer.bias) out.items.push_back({"b" + std::to_string(l), Matrix::Zero(1, layer.out_dim), false});
  }
  return out;
}

void TrainHyper::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
}

LossAndGrad softmax_xent(const Matrix& logits, std::span<const int> targets, std::span<const Index> mask) {
  if (mask.empty()) throw ValidationError("cross-entropy over an empty mask");
  if (static_cast<Index>(targets.size()) != logits.rows())
    throw ValidationError("targets must have one entry per logit row");
  LossAndGrad out;
  out.grad = Matrix::Zero(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(mask.size());
  for (Index row : mask) {
    const int y = targets[row];
    if (y < 0 || y >= logits.cols()) throw ValidationError("target class out of range at row " + std::to_string(row));
    const double shift = logits.row(row).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(row).array() - shift).exp().matrix();
    const double z = e.sum();
    out.loss += (std::log(z) + shift - logits(row, y)) * scale;
    out.grad.row(row) = e / z * scale;
    out.grad(row, y) -= scale;
  }
  return out;
}

namespace {

void check_shapes(const ParamSet& params, const ParamSet& grads) {
  if (params.size() != grads.size()) throw ValidationError("parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].value.rows() != grads[i].value.rows() || params[i].value.cols() != grads[i].value.cols())
      throw ValidationError("gradient shape mismatch for " + params[i].name);
}

}  // namespace

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const TrainHyper& hyper) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  check_shapes(params, grads);
  if (state.first.empty()) {
    for (const auto& p : params.items) {
      state.first.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      state.second.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (state.first.size() != params.size()) throw ValidationError("optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix g = grads[i].value;
    if (params[i].decayed && hyper.weight_decay != 0.0) g += hyper.weight_decay * params[i].value;
    state.first[i] = beta1 * state.first[i] + (1.0 - beta1) * g;
    state.second[i] = beta2 * state.second[i] + (1.0 - beta2) * g.cwiseProduct(g);
    params[i].value.array() -=
        hyper.learning_rate * (state.first[i].array() / c1) / ((state.second[i].array() / c2).sqrt() + eps);
  }
}

void sgd_step(ParamSet& params, const ParamSet& grads, const TrainHyper& hyper) {
  check_shapes(params, grads);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix g = grads[i].value;
    if (params[i].decayed && hyper.weight_decay != 0.0) g += hyper.weight_decay * params[i].value;
    params[i].value -= hyper.learning_rate * g;
  }
}

// ---- layered network -----------------------------------------------------------

FeatureInput::FeatureInput(Matrix dense) : dense_(std::move(dense)) {
  const Index nnz = (dense_.array() != 0.0).count();
  if (dense_.size() > 0 && static_cast<double>(nnz) < 0.1 * static_cast<double>(dense_.size()))
    sparse_ = std::make_shared<const SparseMatrix>(dense_.sparseView());
}

Matrix FeatureInput::times(const Matrix& w) const {
  if (sparse_) return *sparse_ * w;
  return dense_ * w;
}

Matrix FeatureInput::transpose_times(const Matrix& g) const {
  if (sparse_) return sparse_->transpose() * g;
  return dense_.transpose() * g;
}

Network::Network(std::vector<LayerPlan> layers, std::shared_ptr<const SparseMatrix> propagation)
    : layers_(std::move(layers)), propagation_(std::move(propagation)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].propagate && !propagation_) throw ValidationError("propagating layer needs an operator");
    if (l > 0 && layers_[l].in_dim != layers_[l - 1].out_dim) throw ValidationError("layer dimensions do not chain");
  }
}

std::vector<LayerSpec> Network::param_plan() const {
  std::vector<LayerSpec> plan;
  for (const auto& l : layers_) plan.push_back({l.in_dim, l.out_dim, l.bias});
  return plan;
}

namespace {

Matrix activate(const Matrix& z, Activation a) {
  switch (a) {
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::None: break;
  }
  return z;
}

Matrix activation_grad(const Matrix& grad, const Matrix& z, const Matrix& h, Activation a) {
  switch (a) {
    case Activation::Relu: return (z.array() > 0.0).select(grad, 0.0);
    case Activation::Tanh: return grad.array() * (1.0 - h.array().square());
    case Activation::None: break;
  }
  return grad;
}

}  // namespace

Matrix Network::forward(const FeatureInput& x, const ParamSet& params, Cache* cache,
                        std::mt19937_64* dropout_rng) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  c = Cache{};
  const bool training = dropout_rng != nullptr;
  std::size_t p = 0;
  Matrix h;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const Matrix& w = params[p++].value;
    const bool drop = training && layer.dropout > 0.0;
    Matrix mask;
    Matrix input;
    if (drop) {
      const Index rows = l == 0 ? x.rows() : h.rows();
      const Index cols = l == 0 ? x.cols() : h.cols();
      std::bernoulli_distribution keep(1.0 - layer.dropout);
      mask.resize(rows, cols);
      const double scale = 1.0 / (1.0 - layer.dropout);
      for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) mask(i, j) = keep(*dropout_rng) ? scale : 0.0;
      input = (l == 0 ? x.dense() : h).cwiseProduct(mask);
    } else if (l > 0) {
      input = std::move(h);
    }
    Matrix t = (l == 0 && !drop) ? x.times(w) : Matrix(input * w);
    if (layer.propagate) t = *propagation_ * t;
    if (layer.bias) t.rowwise() += params[p++].value.row(0);
    h = activate(t, layer.activation);
    c.inputs.push_back(std::move(input));
    c.masks.push_back(std::move(mask));
    c.preact.push_back(std::move(t));
    c.activations.push_back(h);
  }
  return h;
}

ParamSet Network::backward(const FeatureInput& x, const ParamSet& params, const Cache& cache,
                           const Matrix& grad_output, Matrix* grad_input) const {
  ParamSet grads = params.zeros_like();
  // Parameter slot of each layer's weight.
  std::vector<std::size_t> slot;
  for (std::size_t l = 0, p = 0; l < layers_.size(); ++l) {
    slot.push_back(p);
    p += layers_[l].bias ? 2 : 1;
  }
  Matrix g = grad_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    const Matrix dz = activation_grad(g, cache.preact[l], cache.activations[l], layer.activation);
    if (layer.bias) grads[slot[l] + 1].value = dz.colwise().sum();
    const Matrix dt = layer.propagate ? Matrix(propagation_->transpose() * dz) : dz;
    const bool dropped = cache.masks[l].size() > 0;
    if (l == 0 && !dropped)
      grads[slot[l]].value = x.transpose_times(dt);
    else
      grads[slot[l]].value = cache.inputs[l].transpose() * dt;
    if (l > 0 || grad_input) {
      Matrix dh = dt * params[slot[l]].value.transpose();
      if (dropped) dh = dh.cwiseProduct(cache.masks[l]);
      if (l == 0)
        *grad_input = std::move(dh);
      else
        g = std::move(dh);
    }
  }
  return grads;
}

// ---- gradient oracle -----------------------------------------------------------

GradCheck finite_diff_check(const std::function<double(const ParamSet&)>& loss, const ParamSet& params,
                            const ParamSet& analytic, double eps) {
  GradCheck out;
  ParamSet probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& v = probe[i].value;
    for (Index r = 0; r < v.rows(); ++r)
      for (Index c = 0; c < v.cols(); ++c) {
        const double orig = v(r, c);
        v(r, c) = orig + eps;
        const double up = loss(probe);
        v(r, c) = orig - eps;
        const double down = loss(probe);
        v(r, c) = orig;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[i].value(r, c);
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        if (rel > out.max_relative_error) {
          out.max_relative_error = rel;
          out.worst_param = params[i].name;
        }
        ++out.probes;
      }
  }
  return out;
}

// ---- checkpoints ---------------------------------------------------------------

void write_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  std::ostringstream out;
  for (const auto& p : params.items) {
    out << p.name << ',' << p.value.rows() << ',' << p.value.cols();
    for (Index r = 0; r < p.value.rows(); ++r)
      for (Index c = 0; c < p.value.cols(); ++c) out << ',' << io::format_double(p.value(r, c));
    out << '\n';
  }
  io::write_text(path, out.str());
}

ParamSet read_checkpoint(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const std::string name = path.string();
  ParamSet out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto f = io::split_fields(lines[i], ",");
    if (f.size() < 3) throw ParseError(name, i + 1, "expected name,rows,cols,values...");
    const Index rows = io::parse_int(f[1], name, i + 1);
    const Index cols = io::parse_int(f[2], name, i + 1);
    if (rows < 0 || cols < 0 || static_cast<Index>(f.size()) != 3 + rows * cols)
      throw ParseError(name, i + 1, "value count does not match shape");
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = io::parse_real(f[3 + r * cols + c], name, i + 1);
    const std::string pname(f[0]);
    out.items.push_back({pname, std::move(m), pname.empty() || pname.front() != 'b'});
  }
  return out;
}

}  // namespace cog
