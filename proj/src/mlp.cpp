#include "semantify/mlp.hpp"

#include <cmath>

#include <fmt/format.h>

#include "semantify/error.hpp"

namespace semantify {

namespace {

DenseLayer zeros_like(const DenseLayer& l) {
  return {Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())};
}

}  // namespace

Mlp::Mlp(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw ArgumentError("an MLP needs at least input and output widths");
  for (const int s : sizes)
    if (s < 1) throw ArgumentError(fmt::format("invalid layer width {}", s));
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer;
    layer.weight.resize(sizes[l + 1], sizes[l]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    layer.bias.resize(sizes[l + 1]);
    for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ArgumentError("an MLP needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows())
      throw DimensionError(fmt::format("layer {}: bias width does not match weight rows", l));
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows())
      throw DimensionError(fmt::format("layer {}: input width does not match previous layer", l));
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Cache cache;
  return forward(x, cache);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache& cache) const {
  if (x.cols() != input_width())
    throw DimensionError(fmt::format("network expects {} inputs, got {}", input_width(), x.cols()));
  cache.inputs.clear();
  cache.pre.clear();
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    cache.inputs.push_back(h);
    Eigen::MatrixXd z = h * layers_[l].weight.transpose();
    z.rowwise() += layers_[l].bias.transpose();
    cache.pre.push_back(z);
    h = l + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

std::vector<DenseLayer> Mlp::backward(const Cache& cache, const Eigen::MatrixXd& dy) const {
  std::vector<DenseLayer> grads(layers_.size());
  Eigen::MatrixXd g = dy;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) g = g.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    grads[l].weight = g.transpose() * cache.inputs[l];
    grads[l].bias = g.colwise().sum().transpose();
    if (l > 0) g = g * layers_[l].weight;
  }
  return grads;
}

Eigen::MatrixXd Mlp::input_gradient(const Cache& cache, const Eigen::MatrixXd& dy) const {
  Eigen::MatrixXd g = dy;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) g = g.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    g = g * layers_[l].weight;
  }
  return g;
}

int Mlp::input_width() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
int Mlp::output_width() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

std::vector<int> Mlp::sizes() const {
  std::vector<int> s;
  if (layers_.empty()) return s;
  s.push_back(input_width());
  for (const auto& l : layers_) s.push_back(static_cast<int>(l.weight.rows()));
  return s;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void Mlp::round_to_float() {
  for (auto& l : layers_) {
    l.weight = l.weight.cast<float>().cast<double>();
    l.bias = l.bias.cast<float>().cast<double>();
  }
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
  for (const auto& l : net.layers()) {
    m_.push_back(zeros_like(l));
    v_.push_back(zeros_like(l));
  }
}

void Adam::step(Mlp& net, const std::vector<DenseLayer>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& layers = net.layers();
  const auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, m_[l].weight, v_[l].weight, grads[l].weight);
    update(layers[l].bias, m_[l].bias, v_[l].bias, grads[l].bias);
  }
}

}  // namespace semantify
