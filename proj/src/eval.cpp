#include "qising/eval.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <mutex>
#include <thread>

namespace qising {

namespace {

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Runs `body(i)` for i in [0, n) on up to `threads` workers. Each index
/// writes only its own slot, so results do not depend on scheduling.
template <typename Body>
void parallel_for(int n, int threads, Body body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += threads) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

const PolicyCurve& EvalReport::curve(const std::string& policy) const {
  for (const auto& c : curves) {
    if (c.policy == policy) return c;
  }
  throw std::out_of_range("no curve for policy '" + policy + "'");
}

PolicyCurve rollout(const SisConfig& config, const Policy& policy, int horizon, int n_runs, std::uint64_t seed,
                    const std::string& name, int threads) {
  if (horizon < 1 || n_runs < 1) throw std::invalid_argument("rollout: horizon and run count must be >= 1");
  std::vector<std::vector<double>> rewards(static_cast<std::size_t>(n_runs));
  const Rng root(seed);
  parallel_for(n_runs, threads, [&](int run) {
    const Rng stream = root.child(static_cast<std::uint64_t>(run));
    const Rng dynamics = stream.child("dynamics");
    const Rng policy_stream = stream.child("policy");
    SisState state{Adoption(static_cast<std::size_t>(config.node_count()), 0), 0};
    auto& out = rewards[static_cast<std::size_t>(run)];
    out.reserve(static_cast<std::size_t>(horizon));
    for (int t = 1; t <= horizon; ++t) {
      Rng policy_rng = policy_stream.child(static_cast<std::uint64_t>(t));
      const Decision d = policy.act(Observation{state.adopted, t, std::nullopt}, config.graph, config.partition, policy_rng);
      auto result = step(state, config, Treatment{d.bin, d.node}, dynamics);
      out.push_back(result.reward);
      state = std::move(result.state);
    }
  });

  PolicyCurve curve;
  curve.policy = name.empty() ? policy.kind() : name;
  std::vector<double> column(static_cast<std::size_t>(n_runs));
  for (int h = 0; h < horizon; ++h) {
    for (int r = 0; r < n_runs; ++r) column[static_cast<std::size_t>(r)] = rewards[static_cast<std::size_t>(r)][static_cast<std::size_t>(h)];
    curve.period_mean.push_back(std::accumulate(column.begin(), column.end(), 0.0) / n_runs);
    curve.period_std.push_back(sample_std(column));
  }
  for (const auto& run : rewards) curve.run_welfare.push_back(std::accumulate(run.begin(), run.end(), 0.0));
  curve.welfare_mean = std::accumulate(curve.run_welfare.begin(), curve.run_welfare.end(), 0.0) / n_runs;
  curve.welfare_std = sample_std(curve.run_welfare);
  return curve;
}

EvalReport evaluate(const SisConfig& config, const std::vector<NamedPolicy>& policies, int horizon, int n_runs,
                    std::uint64_t seed, int threads) {
  EvalReport report{horizon, n_runs, seed, {}};
  for (const auto& p : policies) report.curves.push_back(rollout(config, *p.policy, horizon, n_runs, seed, p.name, threads));
  return report;
}

double improvement_vs_baseline(const PolicyCurve& a, const PolicyCurve& b) {
  if (a.period_mean.size() != b.period_mean.size() || a.run_welfare.size() != b.run_welfare.size()) {
    throw std::invalid_argument("improvement_vs_baseline: reports differ in horizon or run count");
  }
  if (b.welfare_mean == 0.0) throw std::domain_error("improvement_vs_baseline: baseline welfare is zero");
  return 100.0 * (a.welfare_mean - b.welfare_mean) / b.welfare_mean;
}

double modularity_correlation(std::span<const double> improvements, std::span<const double> modularities) {
  if (improvements.size() != modularities.size() || improvements.size() < 3) {
    throw std::invalid_argument("modularity_correlation: need equal lengths >= 3");
  }
  const double n = static_cast<double>(improvements.size());
  const double mx = std::accumulate(improvements.begin(), improvements.end(), 0.0) / n;
  const double my = std::accumulate(modularities.begin(), modularities.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < improvements.size(); ++i) {
    const double dx = improvements[i] - mx;
    const double dy = modularities[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::domain_error("modularity_correlation: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

Json to_json(const EvalReport& report) {
  Json j;
  j["horizon"] = report.horizon;
  j["runs"] = report.runs;
  j["seed"] = report.seed;
  Json curves = Json::array();
  for (const auto& c : report.curves) {
    curves.push_back(Json{{"policy", c.policy},
                          {"period_mean", c.period_mean},
                          {"period_std", c.period_std},
                          {"welfare_mean", c.welfare_mean},
                          {"welfare_std", c.welfare_std},
                          {"run_welfare", c.run_welfare}});
  }
  j["curves"] = std::move(curves);
  return j;
}

EvalReport report_from_json(const Json& j) {
  EvalReport r;
  r.horizon = j.at("horizon").get<int>();
  r.runs = j.at("runs").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& c : j.at("curves")) {
    PolicyCurve curve;
    curve.policy = c.at("policy").get<std::string>();
    curve.period_mean = c.at("period_mean").get<std::vector<double>>();
    curve.period_std = c.at("period_std").get<std::vector<double>>();
    curve.welfare_mean = c.at("welfare_mean").get<double>();
    curve.welfare_std = c.at("welfare_std").get<double>();
    curve.run_welfare = c.at("run_welfare").get<std::vector<double>>();
    r.curves.push_back(std::move(curve));
  }
  return r;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "policy,period,mean,std\n";
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& c : report.curves) {
    for (std::size_t h = 0; h < c.period_mean.size(); ++h) {
      out << c.policy << ',' << h + 1 << ',' << c.period_mean[h] << ',' << c.period_std[h] << '\n';
    }
  }
  out.precision(old);
}

}  // namespace qising
