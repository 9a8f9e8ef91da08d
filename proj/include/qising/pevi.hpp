#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "qising/ising.hpp"
#include "qising/transitions.hpp"

namespace qising {

/// Block one-hot feature of dimension K(2K+1): block b holds [1, s], the
/// whole vector scaled by 1/sqrt(2K+1) so that ||phi|| <= 1 on [0,1]^{2K}.
Eigen::VectorXd feature_map(const QIsingState& s, int b);
inline int feature_dim(int k) { return k * (2 * k + 1); }

/// One regression sample for a PEVI stage: the feature of the logged
/// (state, action), the reward, and the features of every action at the
/// next state (empty at the last stage or when the next state is unknown).
struct StageSample {
  Eigen::VectorXd phi;
  double reward = 0.0;
  std::vector<Eigen::VectorXd> next_phis;
};

/// beta * sqrt(phi' Lambda^{-1} phi).
double pevi_bonus(const Eigen::VectorXd& phi, const Eigen::MatrixXd& lambda_matrix, double bonus_beta);

class PeviPolicy {
 public:
  PeviPolicy() = default;
  PeviPolicy(std::vector<Eigen::VectorXd> weights, std::vector<Eigen::MatrixXd> lambdas, double ridge,
             double bonus_beta);

  int horizon() const { return static_cast<int>(weights_.size()); }
  int feature_dim() const { return weights_.empty() ? 0 : static_cast<int>(weights_.front().size()); }
  double ridge() const { return ridge_; }
  double bonus_beta() const { return bonus_beta_; }
  const std::vector<Eigen::VectorXd>& weights() const { return weights_; }
  const std::vector<Eigen::MatrixXd>& lambdas() const { return lambdas_; }

  /// Width sqrt(phi' Lambda_h^{-1} phi) at stage h (1-based).
  double width(int h, const Eigen::VectorXd& phi) const;
  /// clip(phi' w_h - beta * width, 0, H - h + 1).
  double q_value(int h, const Eigen::VectorXd& phi) const;
  /// max over the candidate action features; ties keep the lowest index.
  int greedy(int h, std::span<const Eigen::VectorXd> action_phis) const;
  double value(int h, std::span<const Eigen::VectorXd> action_phis) const;

  /// Convenience wrappers over `feature_map` for Q-Ising states.
  double q_value(int h, const QIsingState& s, int b) const { return q_value(h, feature_map(s, b)); }
  int greedy_action(int h, const QIsingState& s) const;

  bool operator==(const PeviPolicy& other) const;

 private:
  std::vector<Eigen::VectorXd> weights_;
  std::vector<Eigen::MatrixXd> lambdas_;
  std::vector<Eigen::MatrixXd> lambda_inv_;
  double ridge_ = 1.0;
  double bonus_beta_ = 0.0;
};

/// Backward ridge recursion h = H..1 with pessimistic clipping. `stages[h-1]`
/// holds the samples of stage h; an empty stage gives Lambda_h = lambda I.
PeviPolicy train_pevi(const std::vector<std::vector<StageSample>>& stages, int feature_dim, double ridge,
                      double bonus_beta);

/// Split one trajectory of transitions into floor(T/H) contiguous blocks of
/// length H; block tau contributes its h-th transition to stage h.
std::vector<std::vector<StageSample>> pevi_stage_datasets(std::span<const Transition> transitions, int horizon);

/// Monte Carlo estimate of sum_h E[ sqrt(phi_h' Lambda_h^{-1} phi_h) ] from
/// trajectories of (state, action) features, one vector of H features each.
double pevi_uncertainty(const std::vector<std::vector<Eigen::VectorXd>>& trajectories,
                        const std::vector<Eigen::MatrixXd>& stage_lambdas);

/// C_beta [ H sqrt(d log(H (1 + n_log/lambda) / delta)) + sqrt(lambda) W ].
double bonus_beta_from_radius(int horizon, int feature_dim, double n_log, double ridge, double delta, double w_bound,
                              double c_beta);

}  // namespace qising
