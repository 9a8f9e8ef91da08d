#include "qising/ising.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "qising/rng.hpp"

namespace qising {

namespace {

constexpr double kEtaClamp = 35.0;

double log_normal_pdf(double x, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * x * x / var;
}

/// Covariate row of `node` at a period with lagged state y_prev and action.
void covariates(const Graph& graph, const BinPartition& partition, std::span<const std::uint8_t> y_prev,
                std::optional<NodeId> action, NodeId node, std::vector<int>& row) {
  const int k = partition.bin_count();
  row.assign(static_cast<std::size_t>(IsingParams::block_size(k)), 0);
  row[0] = 1;
  row[1] = action && *action == node ? 1 : 0;
  row[2] = y_prev[static_cast<std::size_t>(node)] ? 1 : 0;
  for (NodeId j : graph.neighbors(node)) {
    if (action && *action == j) row[3] = 1;
    if (y_prev[static_cast<std::size_t>(j)]) ++row[4 + static_cast<std::size_t>(partition.bin_of(j))];
  }
}

void check_shapes(const IsingParams& params, const Graph& graph, const BinPartition& partition) {
  if (partition.node_count() != graph.node_count()) throw std::invalid_argument("partition does not match graph");
  if (params.bin_count() != partition.bin_count()) throw std::invalid_argument("params have the wrong bin count");
}

}  // namespace

// ---------------------------------------------------------------- params

IsingParams::IsingParams(int k)
    : beta0(static_cast<std::size_t>(k), 0.0),
      beta1(static_cast<std::size_t>(k), 0.0),
      beta2(static_cast<std::size_t>(k), 0.0),
      beta3(static_cast<std::size_t>(k), 0.0),
      gamma(Eigen::MatrixXd::Zero(k, k)) {}

Eigen::VectorXd IsingParams::flatten() const {
  const int k = bin_count();
  const int p = block_size(k);
  Eigen::VectorXd theta(k * p);
  for (int b = 0; b < k; ++b) {
    const auto i = static_cast<std::size_t>(b);
    theta(b * p + 0) = beta0[i];
    theta(b * p + 1) = beta1[i];
    theta(b * p + 2) = beta2[i];
    theta(b * p + 3) = beta3[i];
    for (int m = 0; m < k; ++m) theta(b * p + 4 + m) = gamma(b, m);
  }
  return theta;
}

IsingParams IsingParams::unflatten(const Eigen::VectorXd& theta, int k) {
  const int p = block_size(k);
  if (theta.size() != k * p) throw std::invalid_argument("parameter vector has the wrong length");
  IsingParams out(k);
  for (int b = 0; b < k; ++b) {
    const auto i = static_cast<std::size_t>(b);
    out.beta0[i] = theta(b * p + 0);
    out.beta1[i] = theta(b * p + 1);
    out.beta2[i] = theta(b * p + 2);
    out.beta3[i] = theta(b * p + 3);
    for (int m = 0; m < k; ++m) out.gamma(b, m) = theta(b * p + 4 + m);
  }
  return out;
}

bool IsingParams::operator==(const IsingParams& other) const {
  return beta0 == other.beta0 && beta1 == other.beta1 && beta2 == other.beta2 && beta3 == other.beta3 &&
         gamma.rows() == other.gamma.rows() && gamma.cols() == other.gamma.cols() && gamma == other.gamma;
}

void PriorSpec::validate() const {
  if (!(v0 > 0.0 && v0 < v1)) throw std::invalid_argument("prior requires 0 < v0 < v1");
  if (!(c > 0.0)) throw std::invalid_argument("prior requires c > 0");
  if (!(tau2 > 0.0)) throw std::invalid_argument("prior requires tau2 > 0");
}

double PriorSpec::inclusion_rate(int source_bin_size) const {
  return std::min(c / static_cast<double>(source_bin_size), 1.0);
}

double inclusion_probability(double gamma, double v0, double v1, double w) {
  if (w <= 0.0) return 0.0;
  if (w >= 1.0) return 1.0;
  // Ratio of spike to slab density, in log space.
  const double log_slab = std::log(w) + log_normal_pdf(gamma, v1);
  const double log_spike = std::log1p(-w) + log_normal_pdf(gamma, v0);
  return 1.0 / (1.0 + std::exp(log_spike - log_slab));
}

double log_mixture_prior(double gamma, double v0, double v1, double w) {
  const double a = std::log(w) + log_normal_pdf(gamma, v1);
  if (w >= 1.0) return a;
  const double b = std::log1p(-w) + log_normal_pdf(gamma, v0);
  const double hi = std::max(a, b);
  return hi + std::log(std::exp(a - hi) + std::exp(b - hi));
}

double log_mixture_prior_grad(double gamma, double v0, double v1, double w) {
  const double p = inclusion_probability(gamma, v0, v1, w);
  return -gamma * (p / v1 + (1.0 - p) / v0);
}

double sigmoid(double eta) {
  eta = std::clamp(eta, -kEtaClamp, kEtaClamp);
  return 1.0 / (1.0 + std::exp(-eta));
}

double softplus(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

// ---------------------------------------------------------------- model

double linear_predictor(const IsingParams& params, const Graph& graph, const BinPartition& partition,
                        std::span<const std::uint8_t> y_prev, std::optional<NodeId> action, NodeId node) {
  check_shapes(params, graph, partition);
  if (node < 0 || node >= graph.node_count()) throw std::out_of_range("node out of range");
  if (static_cast<int>(y_prev.size()) != graph.node_count()) throw std::invalid_argument("y_prev length mismatch");
  const auto k = static_cast<std::size_t>(partition.bin_of(node));
  double eta = params.beta0[k];
  if (action && *action == node) eta += params.beta1[k];
  if (y_prev[static_cast<std::size_t>(node)]) eta += params.beta2[k];
  bool neighbor_treated = false;
  for (NodeId j : graph.neighbors(node)) {
    if (action && *action == j) neighbor_treated = true;
    if (y_prev[static_cast<std::size_t>(j)]) eta += params.gamma(static_cast<Eigen::Index>(k), partition.bin_of(j));
  }
  if (neighbor_treated) eta += params.beta3[k];
  return eta;
}

double log_likelihood(const IsingParams& params, const Panel& panel, const Graph& graph,
                      const BinPartition& partition) {
  check_shapes(params, graph, partition);
  if (panel.periods() < 1) throw std::invalid_argument("log_likelihood: empty panel");
  double total = 0.0;
  for (int t = 1; t <= panel.periods(); ++t) {
    const auto& prev = panel.y(t - 1);
    const auto& rec = panel.records[static_cast<std::size_t>(t - 1)];
    for (NodeId i = 0; i < graph.node_count(); ++i) {
      const double eta = linear_predictor(params, graph, partition, prev, rec.action, i);
      total += (rec.y[static_cast<std::size_t>(i)] ? eta : 0.0) - softplus(eta);
    }
  }
  return total;
}

// ---------------------------------------------------------------- sufficient statistics

IsingData::IsingData(const Panel& panel, const Graph& graph, const BinPartition& partition, int first_period,
                     std::optional<int> last_period)
    : k_(partition.bin_count()) {
  if (partition.node_count() != graph.node_count() || panel.node_count() != graph.node_count()) {
    throw std::invalid_argument("panel, graph and partition sizes disagree");
  }
  const int last = last_period.value_or(panel.periods());
  if (first_period < 1 || last > panel.periods() || first_period > last) {
    throw std::invalid_argument("IsingData: empty or invalid period range");
  }
  for (int b = 0; b < k_; ++b) bin_sizes_.push_back(partition.bin_size(b));

  std::vector<std::map<std::vector<int>, std::pair<double, double>>> tally(static_cast<std::size_t>(k_));
  std::vector<int> row;
  for (int t = first_period; t <= last; ++t) {
    const auto& prev = panel.y(t - 1);
    const auto& rec = panel.records[static_cast<std::size_t>(t - 1)];
    for (NodeId i = 0; i < graph.node_count(); ++i) {
      covariates(graph, partition, prev, rec.action, i, row);
      auto& cell = tally[static_cast<std::size_t>(partition.bin_of(i))][row];
      cell.first += 1.0;
      cell.second += rec.y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      ++observations_;
    }
  }
  const int p = IsingParams::block_size(k_);
  for (const auto& cells : tally) {
    Block block;
    block.x.resize(static_cast<Eigen::Index>(cells.size()), p);
    block.count.resize(static_cast<Eigen::Index>(cells.size()));
    block.ones.resize(static_cast<Eigen::Index>(cells.size()));
    Eigen::Index r = 0;
    for (const auto& [key, value] : cells) {
      for (int c = 0; c < p; ++c) block.x(r, c) = key[static_cast<std::size_t>(c)];
      block.count(r) = value.first;
      block.ones(r) = value.second;
      ++r;
    }
    blocks_.push_back(std::move(block));
  }
}

std::size_t IsingData::row_count() const {
  std::size_t rows = 0;
  for (const auto& b : blocks_) rows += static_cast<std::size_t>(b.x.rows());
  return rows;
}

double IsingData::log_likelihood(const Eigen::VectorXd& theta) const {
  const int p = IsingParams::block_size(k_);
  double total = 0.0;
  for (int b = 0; b < k_; ++b) {
    const auto& blk = blocks_[static_cast<std::size_t>(b)];
    const Eigen::VectorXd eta = blk.x * theta.segment(b * p, p);
    for (Eigen::Index r = 0; r < eta.size(); ++r) total += blk.ones(r) * eta(r) - blk.count(r) * softplus(eta(r));
  }
  return total;
}

double IsingData::log_likelihood_grad(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
  const int p = IsingParams::block_size(k_);
  double total = 0.0;
  for (int b = 0; b < k_; ++b) {
    const auto& blk = blocks_[static_cast<std::size_t>(b)];
    const Eigen::VectorXd eta = blk.x * theta.segment(b * p, p);
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index r = 0; r < eta.size(); ++r) {
      total += blk.ones(r) * eta(r) - blk.count(r) * softplus(eta(r));
      resid(r) = blk.ones(r) - blk.count(r) / (1.0 + std::exp(-eta(r)));
    }
    grad.segment(b * p, p) += blk.x.transpose() * resid;
  }
  return total;
}

Eigen::MatrixXd IsingData::fisher_block(const Eigen::VectorXd& theta, int bin) const {
  const int p = IsingParams::block_size(k_);
  const auto& blk = blocks_.at(static_cast<std::size_t>(bin));
  const Eigen::VectorXd eta = blk.x * theta.segment(bin * p, p);
  Eigen::VectorXd w(eta.size());
  for (Eigen::Index r = 0; r < eta.size(); ++r) {
    const double s = 1.0 / (1.0 + std::exp(-eta(r)));
    w(r) = blk.count(r) * s * (1.0 - s);
  }
  return blk.x.transpose() * w.asDiagonal() * blk.x;
}

// ---------------------------------------------------------------- posterior

LogPosterior::LogPosterior(const IsingData& data, PriorSpec priors) : data_(data), priors_(priors) {
  priors_.validate();
}

double LogPosterior::inclusion_rate(int source_bin) const {
  return priors_.inclusion_rate(data_.bin_sizes().at(static_cast<std::size_t>(source_bin)));
}

double LogPosterior::log_prior(const Eigen::VectorXd& theta) const {
  const int k = data_.bin_count();
  const int p = IsingParams::block_size(k);
  double lp = 0.0;
  for (int b = 0; b < k; ++b) {
    for (int j = 0; j < 4; ++j) lp += log_normal_pdf(theta(b * p + j), priors_.tau2);
    for (int m = 0; m < k; ++m) lp += log_mixture_prior(theta(b * p + 4 + m), priors_.v0, priors_.v1, inclusion_rate(m));
  }
  return lp;
}

double LogPosterior::value(const Eigen::VectorXd& theta) const { return data_.log_likelihood(theta) + log_prior(theta); }

double LogPosterior::value_grad(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
  const int k = data_.bin_count();
  const int p = IsingParams::block_size(k);
  grad.setZero(theta.size());
  const double ll = data_.log_likelihood_grad(theta, grad);
  for (int b = 0; b < k; ++b) {
    for (int j = 0; j < 4; ++j) grad(b * p + j) -= theta(b * p + j) / priors_.tau2;
    for (int m = 0; m < k; ++m) {
      grad(b * p + 4 + m) += log_mixture_prior_grad(theta(b * p + 4 + m), priors_.v0, priors_.v1, inclusion_rate(m));
    }
  }
  return ll + log_prior(theta);
}

// ---------------------------------------------------------------- EMVS

namespace {

/// Maximizes LL_b(theta_b) - 0.5 * sum_j penalty_j * theta_j^2 by damped Newton.
void newton_block(const IsingData& data, Eigen::VectorXd& theta, int bin, const Eigen::VectorXd& penalty,
                  const EmvsOptions& opts) {
  const int p = IsingParams::block_size(data.bin_count());
  const auto& blk = data.block(bin);
  auto objective = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd eta = blk.x * w;
    double f = 0.0;
    for (Eigen::Index r = 0; r < eta.size(); ++r) f += blk.ones(r) * eta(r) - blk.count(r) * softplus(eta(r));
    return f - 0.5 * (penalty.array() * w.array().square()).sum();
  };
  Eigen::VectorXd w = theta.segment(bin * p, p);
  double f = objective(w);
  for (int it = 0; it < opts.newton_iters; ++it) {
    const Eigen::VectorXd eta = blk.x * w;
    Eigen::VectorXd resid(eta.size()), weight(eta.size());
    for (Eigen::Index r = 0; r < eta.size(); ++r) {
      const double s = 1.0 / (1.0 + std::exp(-eta(r)));
      resid(r) = blk.ones(r) - blk.count(r) * s;
      weight(r) = blk.count(r) * s * (1.0 - s);
    }
    const Eigen::VectorXd grad = blk.x.transpose() * resid - (penalty.array() * w.array()).matrix();
    Eigen::MatrixXd hess = blk.x.transpose() * weight.asDiagonal() * blk.x;
    hess.diagonal() += penalty;
    const Eigen::VectorXd dir = hess.ldlt().solve(grad);
    double step = 1.0;
    Eigen::VectorXd candidate = w + dir;
    double fc = objective(candidate);
    while (fc < f && step > 1e-10) {
      step *= 0.5;
      candidate = w + step * dir;
      fc = objective(candidate);
    }
    if (fc < f) break;
    const double change = (candidate - w).cwiseAbs().maxCoeff();
    w = candidate;
    f = fc;
    if (change < opts.newton_tol) break;
  }
  theta.segment(bin * p, p) = w;
}

}  // namespace

EmvsResult fit_emvs(const IsingData& data, const PriorSpec& priors, const EmvsOptions& opts) {
  priors.validate();
  const int k = data.bin_count();
  const int p = IsingParams::block_size(k);
  const LogPosterior posterior(data, priors);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(data.dimension());
  Eigen::MatrixXd incl(k, k);

  EmvsResult result;
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    // E-step
    for (int b = 0; b < k; ++b) {
      for (int m = 0; m < k; ++m) {
        incl(b, m) = inclusion_probability(theta(b * p + 4 + m), priors.v0, priors.v1, posterior.inclusion_rate(m));
      }
    }
    // M-step
    const Eigen::VectorXd previous = theta;
    Eigen::VectorXd all_penalty(theta.size());
    for (int b = 0; b < k; ++b) {
      Eigen::VectorXd penalty(p);
      penalty.head(4).setConstant(1.0 / priors.tau2);
      for (int m = 0; m < k; ++m) penalty(4 + m) = incl(b, m) / priors.v1 + (1.0 - incl(b, m)) / priors.v0;
      all_penalty.segment(b * p, p) = penalty;
      newton_block(data, theta, b, penalty, opts);
    }
    result.iterations = iter;
    auto penalized = [&](const Eigen::VectorXd& x) {
      return data.log_likelihood(x) - 0.5 * (all_penalty.array() * x.array().square()).sum();
    };
    result.penalized_start_trace.push_back(penalized(previous));
    result.penalized_trace.push_back(penalized(theta));
    result.log_posterior_trace.push_back(posterior.value(theta));
    if ((theta - previous).cwiseAbs().maxCoeff() < opts.tol) {
      result.converged = true;
      break;
    }
  }
  for (int b = 0; b < k; ++b) {
    for (int m = 0; m < k; ++m) {
      incl(b, m) = inclusion_probability(theta(b * p + 4 + m), priors.v0, priors.v1, posterior.inclusion_rate(m));
    }
  }
  result.params = IsingParams::unflatten(theta, k);
  result.inclusion = incl;
  return result;
}

EmvsResult fit_emvs(const Panel& panel, const Graph& graph, const BinPartition& partition, const PriorSpec& priors,
                    const EmvsOptions& opts) {
  if (panel.periods() < 2) throw std::invalid_argument("fit_emvs: panel needs at least 2 periods");
  const IsingData data(panel, graph, partition);
  return fit_emvs(data, priors, opts);
}

// ---------------------------------------------------------------- states

std::vector<double> belief_no_intervention(const IsingParams& params, const Graph& graph,
                                           const BinPartition& partition, std::span<const std::uint8_t> y_prev) {
  std::vector<double> out(static_cast<std::size_t>(graph.node_count()));
  for (NodeId i = 0; i < graph.node_count(); ++i) {
    out[static_cast<std::size_t>(i)] = sigmoid(linear_predictor(params, graph, partition, y_prev, std::nullopt, i));
  }
  return out;
}

std::vector<double> QIsingState::concat() const {
  std::vector<double> out(l0_bar);
  out.insert(out.end(), y_bar.begin(), y_bar.end());
  return out;
}

QIsingState build_state(std::span<const double> l0, std::span<const std::uint8_t> y_prev,
                        const BinPartition& partition) {
  const auto n = static_cast<std::size_t>(partition.node_count());
  if (l0.size() != n || y_prev.size() != n) throw std::invalid_argument("build_state: vector length mismatch");
  const auto k = static_cast<std::size_t>(partition.bin_count());
  QIsingState s{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = static_cast<std::size_t>(partition.bin_of(static_cast<NodeId>(i)));
    s.l0_bar[b] += l0[i];
    s.y_bar[b] += y_prev[i] ? 1.0 : 0.0;
  }
  for (std::size_t b = 0; b < k; ++b) {
    const double size = static_cast<double>(partition.bin_size(static_cast<int>(b)));
    s.l0_bar[b] /= size;
    s.y_bar[b] /= size;
  }
  return s;
}

// ---------------------------------------------------------------- AUC

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t r = i; r < j; ++r) {
      if (labels[order[r]]) {
        positives += 1.0;
        rank_sum += mid_rank;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) throw std::domain_error("auc undefined with a single outcome class");
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double one_step_auc(const IsingParams& params, const Panel& holdout, const Graph& graph,
                    const BinPartition& partition) {
  if (holdout.periods() < 1) throw std::invalid_argument("one_step_auc: empty holdout");
  std::vector<double> scores;
  Adoption labels;
  for (int t = 1; t <= holdout.periods(); ++t) {
    const auto& rec = holdout.records[static_cast<std::size_t>(t - 1)];
    for (NodeId i = 0; i < graph.node_count(); ++i) {
      scores.push_back(sigmoid(linear_predictor(params, graph, partition, holdout.y(t - 1), rec.action, i)));
      labels.push_back(rec.y[static_cast<std::size_t>(i)]);
    }
  }
  return auc(scores, labels);
}

Panel simulate_ising_panel(const IsingParams& params, const Graph& graph, const BinPartition& partition,
                           int periods, std::uint64_t seed, bool treat, std::optional<Adoption> y0) {
  check_shapes(params, graph, partition);
  if (periods < 1) throw std::invalid_argument("simulate_ising_panel: periods must be >= 1");
  const int n = graph.node_count();
  const Rng root(seed);
  Panel panel;
  panel.y0 = y0 ? std::move(*y0) : Adoption(static_cast<std::size_t>(n), 0);
  for (int t = 1; t <= periods; ++t) {
    Rng rng = root.child(static_cast<std::uint64_t>(t));
    std::optional<NodeId> action;
    if (treat) action = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
    const auto& prev = panel.y(t - 1);
    Adoption y(static_cast<std::size_t>(n));
    for (NodeId i = 0; i < n; ++i) {
      const double prob = sigmoid(linear_predictor(params, graph, partition, prev, action, i));
      y[static_cast<std::size_t>(i)] = rng.uniform() < prob ? 1 : 0;
    }
    panel.records.push_back({action, std::move(y)});
  }
  return panel;
}

}  // namespace qising
