#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qising/rng.hpp"
#include "qising/transitions.hpp"

namespace qising {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Feed-forward Q-network: 2K inputs, ReLU hidden layers, K outputs.
class QFunction {
 public:
  QFunction() = default;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization from `seed`.
  QFunction(int state_dim, std::vector<int> hidden, int n_actions, std::uint64_t seed);

  int state_dim() const { return state_dim_; }
  int n_actions() const { return n_actions_; }
  const std::vector<int>& hidden() const { return hidden_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// Q-values for each column of `states` (state_dim x B) -> n_actions x B.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& states) const;
  std::vector<double> q_values(std::span<const double> state) const;
  /// argmax with the lowest index winning ties.
  int greedy_action(std::span<const double> state) const;

  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);
  std::size_t parameter_count() const;

  // Training metadata carried into the persisted model.
  double psi = 0.8;
  double alpha = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const QFunction& other) const;

 private:
  int state_dim_ = 0;
  int n_actions_ = 0;
  std::vector<int> hidden_;
  std::vector<DenseLayer> layers_;
};

struct Batch {
  Eigen::MatrixXd s;       // state_dim x B
  std::vector<int> b;
  Eigen::VectorXd r;
  Eigen::MatrixXd s_next;  // state_dim x B
};

Batch make_batch(std::span<const Transition> transitions);

struct CqlLossParts {
  double bellman = 0.0;  // mean squared TD error
  double penalty = 0.0;  // mean of logsumexp(Q) - Q(s, b)
  double total = 0.0;    // bellman + alpha * penalty
};

/// Conservative Q-learning objective against a frozen target network.
CqlLossParts cql_loss(const QFunction& q, const Batch& batch, const QFunction& target_q, double alpha, double psi);

/// Same loss plus gradients w.r.t. every layer of `q`. When `dropout_rng`
/// is given, inverted dropout with rate `dropout` is applied to the hidden
/// activations of `q` (the target network never uses dropout).
CqlLossParts cql_loss_grad(const QFunction& q, const Batch& batch, const QFunction& target_q, double alpha,
                           double psi, std::vector<DenseLayer>& grads, double dropout = 0.0,
                           Rng* dropout_rng = nullptr);

struct CqlHyper {
  std::vector<int> hidden{256, 256};
  int batch_size = 64;
  double learning_rate = 3e-4;
  double dropout = 0.3;
  double psi = 0.8;
  double alpha = 0.1;
  int max_steps = 30000;
  int steps_per_epoch = 1000;
  int patience = 10;
  double min_delta = 1e-4;
};

struct CqlReport {
  int steps = 0;
  int epochs = 0;
  bool stopped_early = false;
  std::vector<double> epoch_td_loss;
};

/// Minibatch Adam on the CQL objective; the target network is synced at the
/// end of every epoch. Throws std::runtime_error on a non-finite loss.
QFunction train_cql(std::span<const Transition> dataset, const CqlHyper& hyper, std::uint64_t seed,
                    CqlReport* report = nullptr);

}  // namespace qising
