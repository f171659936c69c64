#include "bisimkit/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace bisimkit::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSoftplus: return "softplus";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "softplus") return Activation::kSoftplus;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw std::invalid_argument("MlpSpec needs at least one layer");
  for (int w : layer_widths)
    if (w <= 0) throw std::invalid_argument("MlpSpec widths must be positive");
}

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix apply(Activation a, const Matrix& pre) {
  switch (a) {
    case Activation::kIdentity: return pre;
    case Activation::kRelu: return pre.cwiseMax(0.0);
    case Activation::kTanh: return pre.array().tanh().matrix();
    case Activation::kSoftplus: return pre.unaryExpr([](double x) { return softplus(x); });
  }
  return pre;
}

// dL/dpre given dL/dout, pre-activation and activation output.
Matrix apply_derivative(Activation a, const Matrix& grad, const Matrix& pre, const Matrix& out) {
  switch (a) {
    case Activation::kIdentity: return grad;
    case Activation::kRelu: return (pre.array() > 0.0).select(grad, 0.0);
    case Activation::kTanh: return (grad.array() * (1.0 - out.array().square())).matrix();
    case Activation::kSoftplus:
      return (grad.array() * pre.unaryExpr([](double x) { return sigmoid(x); }).array()).matrix();
  }
  return grad;
}

}  // namespace

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  spec_.validate();
  const auto& widths = spec_.layer_widths;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Matrix w(out, in);
    Vector b(out);
    for (int c = 0; c < in; ++c)
      for (int r = 0; r < out; ++r) w(r, c) = uniform(rng, -bound, bound);
    for (int r = 0; r < out; ++r) b(r) = uniform(rng, -bound, bound);
    w_.push_back(std::move(w));
    b_.push_back(std::move(b));
    gw_.push_back(Matrix::Zero(out, in));
    gb_.push_back(Vector::Zero(out));
  }
}

Matrix Mlp::forward(const Matrix& x) const {
  if (x.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input width mismatch");
  Matrix h = x;
  for (int l = 0; l < n_layers(); ++l) {
    Matrix pre = w_[l] * h;
    pre.colwise() += b_[l];
    h = apply(l + 1 == n_layers() ? spec_.output : spec_.hidden, pre);
  }
  return h;
}

const Matrix& Mlp::forward(const Matrix& x, Cache& cache) const {
  if (x.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input width mismatch");
  cache.inputs.resize(n_layers());
  cache.pre.resize(n_layers());
  cache.inputs[0] = x;
  for (int l = 0; l < n_layers(); ++l) {
    cache.pre[l] = w_[l] * cache.inputs[l];
    cache.pre[l].colwise() += b_[l];
    Matrix out = apply(l + 1 == n_layers() ? spec_.output : spec_.hidden, cache.pre[l]);
    if (l + 1 < n_layers())
      cache.inputs[l + 1] = std::move(out);
    else
      cache.output = std::move(out);
  }
  cache.owner = this;
  cache.version = version_;
  return cache.output;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& grad_out, bool accumulate) {
  if (cache.owner != this || cache.version != version_)
    throw std::logic_error("Mlp::backward: stale or foreign forward cache");
  if (grad_out.rows() != cache.output.rows() || grad_out.cols() != cache.output.cols())
    throw std::invalid_argument("Mlp::backward: upstream gradient shape mismatch");
  Matrix grad = grad_out;
  for (int l = n_layers() - 1; l >= 0; --l) {
    const bool last = l + 1 == n_layers();
    const Matrix& out = last ? cache.output : cache.inputs[l + 1];
    Matrix dpre = apply_derivative(last ? spec_.output : spec_.hidden, grad, cache.pre[l], out);
    if (accumulate) {
      gw_[l].noalias() += dpre * cache.inputs[l].transpose();
      gb_[l] += dpre.rowwise().sum();
    }
    grad = w_[l].transpose() * dpre;
  }
  return grad;
}

void Mlp::zero_grad() {
  for (auto& g : gw_) g.setZero();
  for (auto& g : gb_) g.setZero();
}

std::vector<ParamView> Mlp::params() {
  ++version_;
  std::vector<ParamView> views;
  for (int l = 0; l < n_layers(); ++l) {
    views.push_back({w_[l].data(), gw_[l].data(), static_cast<std::size_t>(w_[l].size())});
    views.push_back({b_[l].data(), gb_[l].data(), static_cast<std::size_t>(b_[l].size())});
  }
  return views;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < n_layers(); ++l) n += w_[l].size() + b_[l].size();
  return n;
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (int l = 0; l < n_layers(); ++l) {
    out.insert(out.end(), w_[l].data(), w_[l].data() + w_[l].size());
    out.insert(out.end(), b_[l].data(), b_[l].data() + b_[l].size());
  }
  return out;
}

std::vector<double> Mlp::flat_gradients() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (int l = 0; l < n_layers(); ++l) {
    out.insert(out.end(), gw_[l].data(), gw_[l].data() + gw_[l].size());
    out.insert(out.end(), gb_[l].data(), gb_[l].data() + gb_[l].size());
  }
  return out;
}

void Mlp::set_flat_parameters(const std::vector<double>& values) {
  if (values.size() != parameter_count()) throw std::invalid_argument("Mlp: flat parameter size mismatch");
  std::size_t k = 0;
  for (int l = 0; l < n_layers(); ++l) {
    std::copy_n(values.data() + k, w_[l].size(), w_[l].data());
    k += w_[l].size();
    std::copy_n(values.data() + k, b_[l].size(), b_[l].data());
    k += b_[l].size();
  }
  ++version_;
}

bool Mlp::same_parameters(const Mlp& other) const {
  if (!(spec_ == other.spec_)) return false;
  for (int l = 0; l < n_layers(); ++l)
    if (w_[l] != other.w_[l] || b_[l] != other.b_[l]) return false;
  return true;
}

void Adam::step(const std::vector<ParamView>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.size, 0.0);
      v_.emplace_back(p.size, 0.0);
    }
  }
  if (params.size() != m_.size()) throw std::invalid_argument("Adam: parameter list changed shape");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    if (p.size != m_[k].size()) throw std::invalid_argument("Adam: parameter shape changed");
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size; ++i) {
      const double g = p.grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void polyak_update(Mlp& target, const Mlp& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("polyak_update: tau must lie in [0, 1]");
  if (!(target.spec_ == online.spec_)) throw std::invalid_argument("polyak_update: shape mismatch");
  for (int l = 0; l < target.n_layers(); ++l) {
    target.w_[l] = tau * online.w_[l] + (1.0 - tau) * target.w_[l];
    target.b_[l] = tau * online.b_[l] + (1.0 - tau) * target.b_[l];
  }
  ++target.version_;
}

std::vector<ParamView> join(std::initializer_list<std::vector<ParamView>> groups) {
  std::vector<ParamView> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

nlohmann::json to_json(const Mlp& mlp) {
  nlohmann::json j;
  j["widths"] = mlp.spec().layer_widths;
  j["hidden"] = to_string(mlp.spec().hidden);
  j["output"] = to_string(mlp.spec().output);
  auto layers = nlohmann::json::array();
  for (int l = 0; l < mlp.n_layers(); ++l) {
    const auto& w = mlp.weight(l);
    const auto& b = mlp.bias(l);
    nlohmann::json layer;
    layer["weight_shape"] = {w.rows(), w.cols()};
    layer["weight"] = std::vector<double>(w.data(), w.data() + w.size());  // column-major
    layer["bias"] = std::vector<double>(b.data(), b.data() + b.size());
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.layer_widths = j.at("widths").get<std::vector<int>>();
  spec.hidden = activation_from_string(j.at("hidden").get<std::string>());
  spec.output = activation_from_string(j.at("output").get<std::string>());
  Rng rng(0);
  Mlp mlp(spec, rng);
  const auto& layers = j.at("layers");
  if (!layers.is_array() || static_cast<int>(layers.size()) != mlp.n_layers())
    throw std::invalid_argument("checkpoint layer count does not match widths");
  std::vector<double> flat;
  for (int l = 0; l < mlp.n_layers(); ++l) {
    const auto shape = layers[l].at("weight_shape").get<std::vector<long>>();
    if (shape.size() != 2 || shape[0] != mlp.weight(l).rows() || shape[1] != mlp.weight(l).cols())
      throw std::invalid_argument("checkpoint weight shape does not match widths");
    auto w = layers[l].at("weight").get<std::vector<double>>();
    auto b = layers[l].at("bias").get<std::vector<double>>();
    if (static_cast<long>(w.size()) != shape[0] * shape[1] || static_cast<long>(b.size()) != shape[0])
      throw std::invalid_argument("checkpoint array length does not match shape");
    flat.insert(flat.end(), w.begin(), w.end());
    flat.insert(flat.end(), b.begin(), b.end());
  }
  mlp.set_flat_parameters(flat);
  return mlp;
}

}  // namespace bisimkit::nn
