#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qising/diffusion.hpp"
#include "qising/eval.hpp"
#include "qising/io.hpp"
#include "qising/ising.hpp"
#include "qising/qnetwork.hpp"

namespace qising {

struct GraphSpec {
  std::string source = "sbm";  // "sbm" or "edge_list"
  std::vector<int> blocks{187, 187, 63, 63};
  double p_in = 0.1;
  double p_out = 0.01;
  std::string edge_list;   // path, source == "edge_list"
  std::string partition;   // optional path; communities are detected when empty
  int community_min_size = 1;
};

/// Per-bin SIS rates. A single entry is broadcast to every bin.
struct SisSpec {
  std::vector<double> spread{0.010, 0.012, 0.1, 0.12};
  std::vector<double> churn{0.4, 0.4, 0.2, 0.2};
};

struct PanelSpec {
  int periods = 500;
  std::string logging_policy = "random_bin";
};

struct IsingSpec {
  PriorSpec priors;
  std::string estimator = "emvs";  // "emvs" or "mcmc"
  int draws = 1;                   // P
  int tune = 300;
};

struct PeviSpec {
  int horizon = 25;
  double lambda = 1.0;
  double delta = 0.05;
  double c_beta = 1.0;
  std::optional<double> w_bound;  // defaults to H sqrt(d)
};

struct RlSpec {
  std::string algorithm = "cql";  // "cql" or "pevi"
  std::string state = "ising";    // "ising" or "plain"
  CqlHyper cql;
  PeviSpec pevi;
};

struct EvalSpec {
  int horizon = 25;
  int runs = 50;
  std::vector<std::string> policies{"random_bin", "degree", "degree_bin", "lir", "q_ising"};
};

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_dir = "out";
  GraphSpec graph;
  SisSpec sis;
  PanelSpec panel;
  IsingSpec ising;
  RlSpec rl;
  EvalSpec eval;

  /// Range checks per module contract; throws std::invalid_argument.
  void validate() const;
};

/// Unknown keys at any level are rejected; missing keys take defaults.
RunConfig config_from_json(const Json& j);
Json to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// Stream seeds derived from the master seed by fixed labels:
/// "graph", "panel", "fit", "train" (then member index), "eval".
std::uint64_t stage_seed(const RunConfig& config, const char* label);

/// Artifact names inside the output directory.
namespace artifact {
inline constexpr const char* graph = "graph.csv";
inline constexpr const char* partition = "partition.csv";
inline constexpr const char* panel = "panel.jsonl";
inline constexpr const char* params = "params.json";
inline constexpr const char* draws = "draws.json";
inline constexpr const char* policy = "policy_q_ising.json";
inline constexpr const char* report_json = "report.json";
inline constexpr const char* report_csv = "report.csv";
std::string member_params(int p);
std::string member_transitions(int p);
std::string member_model(int p);
}  // namespace artifact

/// The environment of a run: graph, bins, and SIS rates.
SisConfig load_environment(const RunConfig& config, const std::filesystem::path& out);

void cmd_gen(const RunConfig& config, const std::filesystem::path& out);
Panel cmd_simulate(const RunConfig& config, const std::filesystem::path& out);
/// EMVS always writes params.json; "mcmc" also writes P draws to draws.json.
void cmd_fit(const RunConfig& config, const std::filesystem::path& out);
/// One member per posterior draw (one for EMVS); writes per-member params,
/// transitions, and model files plus the policy spec used by `eval`.
int cmd_train(const RunConfig& config, const std::filesystem::path& out);
EvalReport cmd_eval(const RunConfig& config, const std::filesystem::path& out);
/// fit with P posterior draws, then train and eval the majority-vote policy.
EvalReport cmd_ensemble(RunConfig config, const std::filesystem::path& out);

}  // namespace qising
