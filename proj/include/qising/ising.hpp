#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qising/diffusion.hpp"
#include "qising/graph.hpp"

namespace qising {

/// Bin-level dynamic Ising coefficients. For a node in bin k,
///   eta = beta0[k] + beta1[k]*treated + beta2[k]*y_prev + beta3[k]*neighbor_treated
///         + sum_{j in N(i)} gamma(k, bin(j)) * y_prev[j].
/// gamma is not required to be symmetric.
struct IsingParams {
  std::vector<double> beta0, beta1, beta2, beta3;
  Eigen::MatrixXd gamma;  // K x K, row = affected bin, column = source bin

  IsingParams() = default;
  explicit IsingParams(int k);

  int bin_count() const { return static_cast<int>(beta0.size()); }

  /// Coefficients per affected bin: [b0, b1, b2, b3, gamma(k, 0..K-1)].
  static int block_size(int k) { return 4 + k; }
  Eigen::VectorXd flatten() const;
  static IsingParams unflatten(const Eigen::VectorXd& theta, int k);

  bool operator==(const IsingParams& other) const;
};

struct PriorSpec {
  double v0 = 0.01;   // spike variance
  double v1 = 10.0;   // slab variance
  double c = 1.0;     // inclusion-rate constant
  double tau2 = 10.0;  // variance of the beta coefficients

  void validate() const;
  /// Prior inclusion rate for couplings from source bin m.
  double inclusion_rate(int source_bin_size) const;
};

/// Posterior probability that a coupling at value `gamma` comes from the slab.
double inclusion_probability(double gamma, double v0, double v1, double w);

/// log[w N(g; 0, v1) + (1 - w) N(g; 0, v0)] and its first derivative.
double log_mixture_prior(double gamma, double v0, double v1, double w);
double log_mixture_prior_grad(double gamma, double v0, double v1, double w);

double sigmoid(double eta);
/// log(1 + exp(eta)) without overflow.
double softplus(double eta);

double linear_predictor(const IsingParams& params, const Graph& graph, const BinPartition& partition,
                        std::span<const std::uint8_t> y_prev, std::optional<NodeId> action, NodeId node);

/// Direct evaluation over every (node, period) term.
double log_likelihood(const IsingParams& params, const Panel& panel, const Graph& graph,
                      const BinPartition& partition);

/// Sufficient statistics of a panel: for each affected bin, the distinct
/// covariate rows [1, treated, y_prev, neighbor_treated, adopted-neighbor
/// counts per bin] with their multiplicities and adoption counts. The
/// likelihood splits into one weighted logistic regression per bin.
class IsingData {
 public:
  IsingData(const Panel& panel, const Graph& graph, const BinPartition& partition, int first_period = 1,
            std::optional<int> last_period = std::nullopt);

  int bin_count() const { return k_; }
  int dimension() const { return k_ * IsingParams::block_size(k_); }
  std::size_t row_count() const;
  std::size_t observation_count() const { return observations_; }
  const std::vector<int>& bin_sizes() const { return bin_sizes_; }

  double log_likelihood(const Eigen::VectorXd& theta) const;
  /// Adds the log-likelihood gradient into `grad` and returns the value.
  double log_likelihood_grad(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;
  /// Negative log-likelihood Hessian block for one bin.
  Eigen::MatrixXd fisher_block(const Eigen::VectorXd& theta, int bin) const;

  struct Block {
    Eigen::MatrixXd x;      // rows x (4 + K)
    Eigen::VectorXd count;  // multiplicity of each row
    Eigen::VectorXd ones;   // adoptions among them
  };
  const Block& block(int bin) const { return blocks_.at(static_cast<std::size_t>(bin)); }

 private:
  int k_ = 0;
  std::size_t observations_ = 0;
  std::vector<int> bin_sizes_;
  std::vector<Block> blocks_;
};

/// Log posterior under the marginalized spike-and-slab prior on gamma and
/// Gaussian priors on the betas.
class LogPosterior {
 public:
  LogPosterior(const IsingData& data, PriorSpec priors);

  int dimension() const { return data_.dimension(); }
  double value(const Eigen::VectorXd& theta) const;
  double value_grad(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const;
  double log_prior(const Eigen::VectorXd& theta) const;
  const IsingData& data() const { return data_; }
  const PriorSpec& priors() const { return priors_; }
  /// Prior inclusion rate for entry (k, m) of gamma (indexed by source bin m).
  double inclusion_rate(int source_bin) const;

 private:
  const IsingData& data_;
  PriorSpec priors_;
};

struct EmvsOptions {
  double tol = 1e-4;
  int max_iters = 500;
  int newton_iters = 100;
  double newton_tol = 1e-10;
};

struct EmvsResult {
  IsingParams params;
  Eigen::MatrixXd inclusion;  // K x K posterior inclusion probabilities
  bool converged = false;
  int iterations = 0;
  /// Penalized objective under the weights of each E-step, at the start
  /// and at the end of the M-step that follows it.
  std::vector<double> penalized_start_trace;
  std::vector<double> penalized_trace;
  /// Marginal log posterior after each M-step.
  std::vector<double> log_posterior_trace;
};

EmvsResult fit_emvs(const Panel& panel, const Graph& graph, const BinPartition& partition, const PriorSpec& priors,
                    const EmvsOptions& opts = {});
EmvsResult fit_emvs(const IsingData& data, const PriorSpec& priors, const EmvsOptions& opts = {});

struct HmcOptions {
  int n_draws = 200;
  int n_tune = 300;
  int leapfrog_steps = 16;
  double target_accept = 0.8;
  double divergence_threshold = 1000.0;  // energy error that counts as divergent
  double max_divergent_fraction = 0.05;
};

struct PosteriorDraws {
  std::vector<IsingParams> draws;
  int n_tune = 0;
  std::uint64_t seed = 0;
  double step_size = 0.0;
  double accept_rate = 0.0;
  int divergences = 0;
  bool flagged = false;  // too many divergent transitions
};

PosteriorDraws sample_posterior(const Panel& panel, const Graph& graph, const BinPartition& partition,
                                const PriorSpec& priors, int n_draws, int n_tune, std::uint64_t seed,
                                HmcOptions opts = {});

/// Leapfrog integration with a diagonal inverse mass; exposed for the
/// energy-conservation tests.
void leapfrog(const LogPosterior& target, Eigen::VectorXd& position, Eigen::VectorXd& momentum,
              const Eigen::VectorXd& inv_mass, double step_size, int steps);
double hamiltonian(const LogPosterior& target, const Eigen::VectorXd& position, const Eigen::VectorXd& momentum,
                   const Eigen::VectorXd& inv_mass);

/// sigma(eta) for every node with no intervention.
std::vector<double> belief_no_intervention(const IsingParams& params, const Graph& graph,
                                           const BinPartition& partition, std::span<const std::uint8_t> y_prev);

/// (per-bin mean of l0, per-bin mean of y_prev).
struct QIsingState {
  std::vector<double> l0_bar;
  std::vector<double> y_bar;

  int bin_count() const { return static_cast<int>(l0_bar.size()); }
  std::vector<double> concat() const;
  bool operator==(const QIsingState&) const = default;
};

QIsingState build_state(std::span<const double> l0, std::span<const std::uint8_t> y_prev,
                        const BinPartition& partition);

/// Rank-based AUC with mid-ranks for ties. Throws if one class is absent.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Pooled one-step-ahead AUC of sigma(eta_{i,t}) against y_{i,t}.
double one_step_auc(const IsingParams& params, const Panel& holdout, const Graph& graph,
                    const BinPartition& partition);

/// Draws a panel from the dynamic Ising model itself; each period one node
/// chosen uniformly at random is treated (no treatment when `treat` is false).
Panel simulate_ising_panel(const IsingParams& params, const Graph& graph, const BinPartition& partition,
                           int periods, std::uint64_t seed, bool treat = true,
                           std::optional<Adoption> y0 = std::nullopt);

}  // namespace qising
