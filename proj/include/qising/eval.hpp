#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qising/diffusion.hpp"
#include "qising/io.hpp"
#include "qising/policies.hpp"

namespace qising {

struct PolicyCurve {
  std::string policy;
  std::vector<double> period_mean;  // h = 1..H
  std::vector<double> period_std;   // across-run sample std
  double welfare_mean = 0.0;        // cumulative reward over H
  double welfare_std = 0.0;
  std::vector<double> run_welfare;  // one entry per run
};

struct EvalReport {
  int horizon = 0;
  int runs = 0;
  std::uint64_t seed = 0;
  std::vector<PolicyCurve> curves;

  const PolicyCurve& curve(const std::string& policy) const;
};

/// n_runs independent trajectories of `policy` from no adoption. Run r uses
/// the stream Rng(seed).child(r), so every policy faces the same churn and
/// spread draws in run r.
PolicyCurve rollout(const SisConfig& config, const Policy& policy, int horizon, int n_runs, std::uint64_t seed,
                    const std::string& name = {}, int threads = 1);

struct NamedPolicy {
  std::string name;
  PolicyPtr policy;
};

EvalReport evaluate(const SisConfig& config, const std::vector<NamedPolicy>& policies, int horizon, int n_runs,
                    std::uint64_t seed, int threads = 1);

/// 100 (W_a - W_b) / W_b on cumulative welfare means.
double improvement_vs_baseline(const PolicyCurve& a, const PolicyCurve& b);

/// Pearson correlation; needs >= 3 points and nonzero variance.
double modularity_correlation(std::span<const double> improvements, std::span<const double> modularities);

Json to_json(const EvalReport& report);
EvalReport report_from_json(const Json& j);
/// Tidy `policy,period,mean,std` rows.
void write_report_csv(std::ostream& out, const EvalReport& report);

}  // namespace qising
