#pragma once

#include <Eigen/Core>

#include <vector>

#include "semantify/rng.hpp"

namespace semantify {

/// y = x W^T + b for a batch of row vectors.
struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Fully connected network with ReLU between layers and a linear output.
class Mlp {
 public:
  Mlp() = default;
  /// sizes = {in, hidden..., out}; He-normal weights, zero biases.
  Mlp(const std::vector<int>& sizes, Rng& rng);
  explicit Mlp(std::vector<DenseLayer> layers);

  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input of every layer (post-activation)
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of every layer
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;

  /// Parameter gradients for upstream gradient `dy` (batch x out).
  std::vector<DenseLayer> backward(const Cache& cache, const Eigen::MatrixXd& dy) const;
  /// Gradient with respect to the network input.
  Eigen::MatrixXd input_gradient(const Cache& cache, const Eigen::MatrixXd& dy) const;

  int input_width() const;
  int output_width() const;
  std::vector<int> sizes() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Rounds every parameter to the nearest float.
  void round_to_float();

 private:
  std::vector<DenseLayer> layers_;
};

class Adam {
 public:
  explicit Adam(const Mlp& net, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Mlp& net, const std::vector<DenseLayer>& grads);
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<DenseLayer> m_, v_;
};

}  // namespace semantify
