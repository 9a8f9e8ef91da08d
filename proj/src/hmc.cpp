// Hamiltonian Monte Carlo over the dynamic Ising log posterior.
//
// Fixed-length leapfrog trajectories with a diagonal mass matrix taken from
// the curvature at the EMVS mode, and dual-averaging step-size adaptation
// during the tuning phase.

#include <cmath>
#include <limits>

#include "qising/ising.hpp"
#include "qising/rng.hpp"

namespace qising {

void leapfrog(const LogPosterior& target, Eigen::VectorXd& position, Eigen::VectorXd& momentum,
              const Eigen::VectorXd& inv_mass, double step_size, int steps) {
  Eigen::VectorXd grad(position.size());
  target.value_grad(position, grad);
  momentum += 0.5 * step_size * grad;
  for (int s = 0; s < steps; ++s) {
    position += step_size * inv_mass.cwiseProduct(momentum);
    target.value_grad(position, grad);
    momentum += (s + 1 < steps ? 1.0 : 0.5) * step_size * grad;
  }
}

double hamiltonian(const LogPosterior& target, const Eigen::VectorXd& position, const Eigen::VectorXd& momentum,
                   const Eigen::VectorXd& inv_mass) {
  return -target.value(position) + 0.5 * momentum.cwiseProduct(inv_mass).dot(momentum);
}

namespace {

Eigen::VectorXd draw_momentum(Rng& rng, const Eigen::VectorXd& inv_mass) {
  Eigen::VectorXd p(inv_mass.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = rng.normal() / std::sqrt(inv_mass(i));
  return p;
}

/// One HMC transition; returns the acceptance probability.
double transition(const LogPosterior& target, Eigen::VectorXd& theta, const Eigen::VectorXd& inv_mass,
                  double step_size, int steps, double divergence_threshold, Rng& rng, bool& divergent) {
  Eigen::VectorXd momentum = draw_momentum(rng, inv_mass);
  const double h0 = hamiltonian(target, theta, momentum, inv_mass);
  Eigen::VectorXd proposal = theta;
  leapfrog(target, proposal, momentum, inv_mass, step_size, steps);
  const double h1 = hamiltonian(target, proposal, momentum, inv_mass);
  const double u = rng.uniform();
  divergent = !std::isfinite(h1) || h1 - h0 > divergence_threshold;
  if (divergent) return 0.0;
  const double accept = std::min(1.0, std::exp(h0 - h1));
  if (u < accept) theta = proposal;
  return accept;
}

double initial_step_size(const LogPosterior& target, const Eigen::VectorXd& theta, const Eigen::VectorXd& inv_mass,
                         Rng& rng) {
  double eps = 1.0;
  auto accept_ratio = [&](double e) {
    Eigen::VectorXd q = theta;
    Eigen::VectorXd p = draw_momentum(rng, inv_mass);
    const double h0 = hamiltonian(target, q, p, inv_mass);
    leapfrog(target, q, p, inv_mass, e, 1);
    const double h1 = hamiltonian(target, q, p, inv_mass);
    return std::isfinite(h1) ? std::exp(h0 - h1) : 0.0;
  };
  const double a0 = accept_ratio(eps);
  const double direction = a0 > 0.5 ? 1.0 : -1.0;
  for (int i = 0; i < 50; ++i) {
    const double a = accept_ratio(eps);
    if (std::pow(a, direction) <= std::pow(2.0, -direction)) break;
    eps *= std::pow(2.0, direction);
  }
  return eps;
}

}  // namespace

PosteriorDraws sample_posterior(const Panel& panel, const Graph& graph, const BinPartition& partition,
                                const PriorSpec& priors, int n_draws, int n_tune, std::uint64_t seed,
                                HmcOptions opts) {
  if (n_draws < 1) throw std::invalid_argument("sample_posterior: n_draws must be >= 1");
  if (n_tune < 0) throw std::invalid_argument("sample_posterior: n_tune must be >= 0");
  const IsingData data(panel, graph, partition);
  const LogPosterior target(data, priors);
  const int k = data.bin_count();
  const int p = IsingParams::block_size(k);

  // Start at the EMVS mode; scale momenta by the local curvature there.
  const auto mode = fit_emvs(data, priors);
  Eigen::VectorXd theta = mode.params.flatten();
  Eigen::VectorXd inv_mass(theta.size());
  for (int b = 0; b < k; ++b) {
    Eigen::MatrixXd h = data.fisher_block(theta, b);
    h.diagonal().head(4).array() += 1.0 / priors.tau2;
    for (int m = 0; m < k; ++m) {
      const double incl = mode.inclusion(b, m);
      h(4 + m, 4 + m) += incl / priors.v1 + (1.0 - incl) / priors.v0;
    }
    inv_mass.segment(b * p, p) = h.ldlt().solve(Eigen::MatrixXd::Identity(p, p)).diagonal();
  }

  Rng rng(seed);
  Rng init_rng = rng.child("step-size");
  double eps = initial_step_size(target, theta, inv_mass, init_rng);

  // Dual-averaging step-size adaptation; the final step size is the averaged one.
  const double mu = std::log(10.0 * eps);
  const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  double h_bar = 0.0, log_eps_bar = 0.0;

  PosteriorDraws out;
  out.n_tune = n_tune;
  out.seed = seed;
  double accept_sum = 0.0;
  Rng chain = rng.child("chain");
  for (int m = 1; m <= n_tune + n_draws; ++m) {
    const bool tuning = m <= n_tune;
    bool divergent = false;
    const double accept =
        transition(target, theta, inv_mass, eps, opts.leapfrog_steps, opts.divergence_threshold, chain, divergent);
    if (tuning) {
      const double w = 1.0 / (m + t0);
      h_bar = (1.0 - w) * h_bar + w * (opts.target_accept - accept);
      const double log_eps = mu - std::sqrt(static_cast<double>(m)) / gamma * h_bar;
      const double eta = std::pow(static_cast<double>(m), -kappa);
      log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
      eps = std::exp(log_eps);
      if (m == n_tune) eps = std::exp(log_eps_bar);
    } else {
      accept_sum += accept;
      if (divergent) ++out.divergences;
      out.draws.push_back(IsingParams::unflatten(theta, k));
    }
  }
  out.step_size = eps;
  out.accept_rate = accept_sum / n_draws;
  out.flagged = out.divergences > opts.max_divergent_fraction * n_draws;
  return out;
}

}  // namespace qising
