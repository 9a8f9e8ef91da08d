#include "qising/pevi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qising {

Eigen::VectorXd feature_map(const QIsingState& s, int b) {
  const int k = s.bin_count();
  if (b < 0 || b >= k) throw std::out_of_range("feature_map: action out of range");
  const int block = 2 * k + 1;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(feature_dim(k));
  const double scale = 1.0 / std::sqrt(static_cast<double>(block));
  phi(b * block) = scale;
  for (int i = 0; i < k; ++i) {
    phi(b * block + 1 + i) = scale * s.l0_bar[static_cast<std::size_t>(i)];
    phi(b * block + 1 + k + i) = scale * s.y_bar[static_cast<std::size_t>(i)];
  }
  return phi;
}

double pevi_bonus(const Eigen::VectorXd& phi, const Eigen::MatrixXd& lambda_matrix, double bonus_beta) {
  const double quad = phi.dot(lambda_matrix.ldlt().solve(phi));
  return bonus_beta * std::sqrt(std::max(quad, 0.0));
}

PeviPolicy::PeviPolicy(std::vector<Eigen::VectorXd> weights, std::vector<Eigen::MatrixXd> lambdas, double ridge,
                       double bonus_beta)
    : weights_(std::move(weights)), lambdas_(std::move(lambdas)), ridge_(ridge), bonus_beta_(bonus_beta) {
  if (weights_.size() != lambdas_.size()) throw std::invalid_argument("PeviPolicy: one design matrix per stage");
  for (const auto& l : lambdas_) {
    const Eigen::Index d = l.rows();
    lambda_inv_.push_back(l.ldlt().solve(Eigen::MatrixXd::Identity(d, d)));
  }
}

double PeviPolicy::width(int h, const Eigen::VectorXd& phi) const {
  const auto& inv = lambda_inv_.at(static_cast<std::size_t>(h - 1));
  return std::sqrt(std::max(phi.dot(inv * phi), 0.0));
}

double PeviPolicy::q_value(int h, const Eigen::VectorXd& phi) const {
  const double raw = phi.dot(weights_.at(static_cast<std::size_t>(h - 1))) - bonus_beta_ * width(h, phi);
  return std::clamp(raw, 0.0, static_cast<double>(horizon() - h + 1));
}

int PeviPolicy::greedy(int h, std::span<const Eigen::VectorXd> action_phis) const {
  int best = 0;
  double best_q = q_value(h, action_phis[0]);
  for (std::size_t a = 1; a < action_phis.size(); ++a) {
    const double q = q_value(h, action_phis[a]);
    if (q > best_q) {
      best = static_cast<int>(a);
      best_q = q;
    }
  }
  return best;
}

double PeviPolicy::value(int h, std::span<const Eigen::VectorXd> action_phis) const {
  double best = 0.0;
  for (const auto& phi : action_phis) best = std::max(best, q_value(h, phi));
  return best;
}

int PeviPolicy::greedy_action(int h, const QIsingState& s) const {
  std::vector<Eigen::VectorXd> phis;
  for (int b = 0; b < s.bin_count(); ++b) phis.push_back(feature_map(s, b));
  return greedy(h, phis);
}

bool PeviPolicy::operator==(const PeviPolicy& other) const {
  if (ridge_ != other.ridge_ || bonus_beta_ != other.bonus_beta_ || weights_.size() != other.weights_.size()) {
    return false;
  }
  for (std::size_t h = 0; h < weights_.size(); ++h) {
    if (weights_[h] != other.weights_[h] || lambdas_[h] != other.lambdas_[h]) return false;
  }
  return true;
}

PeviPolicy train_pevi(const std::vector<std::vector<StageSample>>& stages, int feature_dim, double ridge,
                      double bonus_beta) {
  if (!(ridge > 0.0)) throw std::invalid_argument("train_pevi: ridge must be > 0");
  if (bonus_beta < 0.0) throw std::invalid_argument("train_pevi: bonus_beta must be >= 0");
  if (stages.empty()) throw std::invalid_argument("train_pevi: horizon must be >= 1");
  const int horizon = static_cast<int>(stages.size());
  const Eigen::Index d = feature_dim;

  std::vector<Eigen::VectorXd> weights(stages.size(), Eigen::VectorXd::Zero(d));
  // Stages not fitted yet hold lambda I; only stage h+1 is read at stage h.
  std::vector<Eigen::MatrixXd> lambdas(stages.size(), ridge * Eigen::MatrixXd::Identity(d, d));
  PeviPolicy later;
  for (int h = horizon; h >= 1; --h) {
    const auto& samples = stages[static_cast<std::size_t>(h - 1)];
    Eigen::MatrixXd lam = ridge * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (const auto& smp : samples) {
      if (smp.phi.size() != d) throw std::invalid_argument("train_pevi: feature has the wrong dimension");
      double target = smp.reward;
      if (h < horizon && !smp.next_phis.empty()) target += later.value(h + 1, smp.next_phis);
      lam.noalias() += smp.phi * smp.phi.transpose();
      rhs += smp.phi * target;
    }
    weights[static_cast<std::size_t>(h - 1)] = lam.ldlt().solve(rhs);
    lambdas[static_cast<std::size_t>(h - 1)] = lam;
    later = PeviPolicy(weights, lambdas, ridge, bonus_beta);
  }
  return later;
}

std::vector<std::vector<StageSample>> pevi_stage_datasets(std::span<const Transition> transitions, int horizon) {
  if (horizon < 1) throw std::invalid_argument("pevi_stage_datasets: horizon must be >= 1");
  std::vector<std::vector<StageSample>> stages(static_cast<std::size_t>(horizon));
  const std::size_t blocks = transitions.size() / static_cast<std::size_t>(horizon);
  for (std::size_t tau = 0; tau < blocks; ++tau) {
    for (int h = 1; h <= horizon; ++h) {
      const auto& tr = transitions[tau * static_cast<std::size_t>(horizon) + static_cast<std::size_t>(h - 1)];
      StageSample smp{feature_map(tr.s, tr.b), tr.r, {}};
      if (h < horizon) {
        for (int b = 0; b < tr.s_next.bin_count(); ++b) smp.next_phis.push_back(feature_map(tr.s_next, b));
      }
      stages[static_cast<std::size_t>(h - 1)].push_back(std::move(smp));
    }
  }
  return stages;
}

double pevi_uncertainty(const std::vector<std::vector<Eigen::VectorXd>>& trajectories,
                        const std::vector<Eigen::MatrixXd>& stage_lambdas) {
  if (trajectories.empty()) throw std::invalid_argument("pevi_uncertainty: no rollouts");
  std::vector<Eigen::MatrixXd> inv;
  for (const auto& l : stage_lambdas) inv.push_back(l.ldlt().solve(Eigen::MatrixXd::Identity(l.rows(), l.cols())));
  double total = 0.0;
  for (const auto& traj : trajectories) {
    if (traj.size() > inv.size()) throw std::invalid_argument("pevi_uncertainty: trajectory longer than horizon");
    for (std::size_t h = 0; h < traj.size(); ++h) total += std::sqrt(std::max(traj[h].dot(inv[h] * traj[h]), 0.0));
  }
  return total / static_cast<double>(trajectories.size());
}

double bonus_beta_from_radius(int horizon, int feature_dim, double n_log, double ridge, double delta, double w_bound,
                              double c_beta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("bonus_beta_from_radius: delta must lie in (0, 1)");
  if (horizon < 1 || feature_dim < 1 || !(ridge > 0.0) || n_log < 0.0 || w_bound < 0.0 || !(c_beta > 0.0)) {
    throw std::invalid_argument("bonus_beta_from_radius: arguments must be positive");
  }
  const double h = horizon;
  const double log_term = std::log(h * (1.0 + n_log / ridge) / delta);
  return c_beta * (h * std::sqrt(feature_dim * log_term) + std::sqrt(ridge) * w_bound);
}

}  // namespace qising
