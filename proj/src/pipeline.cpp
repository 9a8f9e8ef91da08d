#include "qising/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qising/graph.hpp"
#include "qising/pevi.hpp"
#include "qising/policies.hpp"
#include "qising/transitions.hpp"

namespace qising {

namespace fs = std::filesystem;

namespace {

/// Reads the keys of one JSON object and rejects any it was not asked for.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw std::invalid_argument(where_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& into) {
    seen_.insert(key);
    if (j_.contains(key)) {
      try {
        into = j_.at(key).get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(where_ + "." + key + ": " + e.what());
      }
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw std::invalid_argument(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}

std::vector<double> per_bin(const std::vector<double>& rates, int k, const char* name) {
  if (rates.size() == 1) return std::vector<double>(static_cast<std::size_t>(k), rates.front());
  if (static_cast<int>(rates.size()) != k) {
    throw std::invalid_argument(std::string("sis.") + name + " has " + std::to_string(rates.size()) +
                                " entries for " + std::to_string(k) + " bins");
  }
  return rates;
}

template <typename Writer>
void write_stream_atomic(const fs::path& path, Writer writer) {
  std::ostringstream buf;
  writer(buf);
  write_text_atomic(path, buf.str());
}

Graph read_graph(const fs::path& out) {
  std::ifstream in(out / artifact::graph);
  if (!in) throw std::runtime_error("missing " + (out / artifact::graph).string() + "; run gen-sbm first");
  // First line records the node count so isolated nodes survive the round trip.
  std::string header;
  std::getline(in, header);
  const auto pos = header.find("nodes=");
  if (pos == std::string::npos) throw std::runtime_error("graph.csv: missing '# nodes=N' header");
  const int n = std::stoi(header.substr(pos + 6));
  std::vector<Edge> edges;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(line_no, "expected 'src,dst'");
    edges.emplace_back(std::stoi(line.substr(0, comma)), std::stoi(line.substr(comma + 1)));
  }
  return Graph(n, std::move(edges));
}

void write_graph(const fs::path& path, const Graph& graph) {
  write_stream_atomic(path, [&](std::ostream& os) {
    os << "# nodes=" << graph.node_count() << '\n';
    write_edge_list(os, graph);
  });
}

Panel read_panel_file(const fs::path& out) {
  std::ifstream in(out / artifact::panel);
  if (!in) throw std::runtime_error("missing " + (out / artifact::panel).string() + "; run simulate first");
  return read_panel(in);
}

PolicyPtr named_policy(const std::string& name, const SisConfig& env, const fs::path& out) {
  const fs::path spec_file = out / ("policy_" + name + ".json");
  if (fs::exists(spec_file)) return load_policy(read_json_file(spec_file), env.graph, out, &env);
  return load_policy(Json{{"kind", name}}, env.graph, out, &env);
}

}  // namespace

void RunConfig::validate() const {
  require(threads >= 1, "threads must be >= 1");
  require(graph.source == "sbm" || graph.source == "edge_list", "graph.source must be sbm or edge_list");
  if (graph.source == "sbm") {
    require(!graph.blocks.empty(), "graph.blocks must be nonempty");
    for (int b : graph.blocks) require(b >= 1, "graph.blocks entries must be >= 1");
    require(0.0 <= graph.p_out && graph.p_out <= graph.p_in && graph.p_in <= 1.0, "need 0 <= p_out <= p_in <= 1");
  } else {
    require(!graph.edge_list.empty(), "graph.edge_list path required");
  }
  require(graph.community_min_size >= 1, "graph.community_min_size must be >= 1");
  for (double r : sis.spread) require(r >= 0.0 && r <= 1.0, "sis.spread entries must be in [0,1]");
  for (double r : sis.churn) require(r >= 0.0 && r <= 1.0, "sis.churn entries must be in [0,1]");
  require(!sis.spread.empty() && !sis.churn.empty(), "sis rates must be nonempty");
  require(panel.periods >= 2, "panel.periods must be >= 2");
  require(ising.estimator == "emvs" || ising.estimator == "mcmc", "ising.estimator must be emvs or mcmc");
  ising.priors.validate();
  require(ising.draws >= 1, "ising.draws must be >= 1");
  require(ising.tune >= 0, "ising.tune must be >= 0");
  require(rl.algorithm == "cql" || rl.algorithm == "pevi", "rl.algorithm must be cql or pevi");
  require(rl.state == "ising" || rl.state == "plain", "rl.state must be ising or plain");
  require(rl.cql.batch_size >= 1 && rl.cql.max_steps >= 1 && rl.cql.steps_per_epoch >= 1, "rl.cql sizes must be >= 1");
  require(rl.cql.learning_rate > 0.0, "rl.cql.learning_rate must be > 0");
  require(rl.cql.dropout >= 0.0 && rl.cql.dropout < 1.0, "rl.cql.dropout must be in [0,1)");
  require(rl.cql.psi >= 0.0 && rl.cql.psi < 1.0, "rl.cql.psi must be in [0,1)");
  require(rl.cql.alpha >= 0.0, "rl.cql.alpha must be >= 0");
  for (int w : rl.cql.hidden) require(w >= 1, "rl.cql.hidden widths must be >= 1");
  require(rl.pevi.horizon >= 1, "rl.pevi.horizon must be >= 1");
  require(rl.pevi.lambda > 0.0, "rl.pevi.lambda must be > 0");
  require(rl.pevi.delta > 0.0 && rl.pevi.delta < 1.0, "rl.pevi.delta must be in (0,1)");
  require(eval.horizon >= 1 && eval.runs >= 1, "eval.horizon and eval.runs must be >= 1");
}

RunConfig config_from_json(const Json& j) {
  RunConfig c;
  StrictObject root(j, "config");
  root.read("seed", c.seed);
  root.read("threads", c.threads);
  root.read("output_dir", c.output_dir);
  if (const Json* g = root.child("graph")) {
    StrictObject o(*g, "graph");
    o.read("source", c.graph.source);
    o.read("blocks", c.graph.blocks);
    o.read("p_in", c.graph.p_in);
    o.read("p_out", c.graph.p_out);
    o.read("edge_list", c.graph.edge_list);
    o.read("partition", c.graph.partition);
    o.read("community_min_size", c.graph.community_min_size);
    o.finish();
  }
  if (const Json* s = root.child("sis")) {
    StrictObject o(*s, "sis");
    o.read("spread", c.sis.spread);
    o.read("churn", c.sis.churn);
    o.finish();
  }
  if (const Json* p = root.child("panel")) {
    StrictObject o(*p, "panel");
    o.read("periods", c.panel.periods);
    o.read("logging_policy", c.panel.logging_policy);
    o.finish();
  }
  if (const Json* i = root.child("ising")) {
    StrictObject o(*i, "ising");
    o.read("v0", c.ising.priors.v0);
    o.read("v1", c.ising.priors.v1);
    o.read("c", c.ising.priors.c);
    o.read("tau2", c.ising.priors.tau2);
    o.read("estimator", c.ising.estimator);
    o.read("draws", c.ising.draws);
    o.read("tune", c.ising.tune);
    o.finish();
  }
  if (const Json* r = root.child("rl")) {
    StrictObject o(*r, "rl");
    o.read("algorithm", c.rl.algorithm);
    o.read("state", c.rl.state);
    if (const Json* q = o.child("cql")) {
      StrictObject oq(*q, "rl.cql");
      oq.read("hidden", c.rl.cql.hidden);
      oq.read("batch_size", c.rl.cql.batch_size);
      oq.read("learning_rate", c.rl.cql.learning_rate);
      oq.read("dropout", c.rl.cql.dropout);
      oq.read("psi", c.rl.cql.psi);
      oq.read("alpha", c.rl.cql.alpha);
      oq.read("max_steps", c.rl.cql.max_steps);
      oq.read("steps_per_epoch", c.rl.cql.steps_per_epoch);
      oq.read("patience", c.rl.cql.patience);
      oq.read("min_delta", c.rl.cql.min_delta);
      oq.finish();
    }
    if (const Json* p = o.child("pevi")) {
      StrictObject op(*p, "rl.pevi");
      op.read("horizon", c.rl.pevi.horizon);
      op.read("lambda", c.rl.pevi.lambda);
      op.read("delta", c.rl.pevi.delta);
      op.read("c_beta", c.rl.pevi.c_beta);
      if (const Json* w = op.child("w_bound"); w && !w->is_null()) c.rl.pevi.w_bound = w->get<double>();
      op.finish();
    }
    o.finish();
  }
  if (const Json* e = root.child("eval")) {
    StrictObject o(*e, "eval");
    o.read("horizon", c.eval.horizon);
    o.read("runs", c.eval.runs);
    o.read("policies", c.eval.policies);
    o.finish();
  }
  root.finish();
  c.validate();
  return c;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  j["graph"] = Json{{"source", c.graph.source},
                    {"blocks", c.graph.blocks},
                    {"p_in", c.graph.p_in},
                    {"p_out", c.graph.p_out},
                    {"edge_list", c.graph.edge_list},
                    {"partition", c.graph.partition},
                    {"community_min_size", c.graph.community_min_size}};
  j["sis"] = Json{{"spread", c.sis.spread}, {"churn", c.sis.churn}};
  j["panel"] = Json{{"periods", c.panel.periods}, {"logging_policy", c.panel.logging_policy}};
  j["ising"] = Json{{"v0", c.ising.priors.v0},         {"v1", c.ising.priors.v1},
                    {"c", c.ising.priors.c},           {"tau2", c.ising.priors.tau2},
                    {"estimator", c.ising.estimator},  {"draws", c.ising.draws},
                    {"tune", c.ising.tune}};
  const auto& q = c.rl.cql;
  Json pevi{{"horizon", c.rl.pevi.horizon},
            {"lambda", c.rl.pevi.lambda},
            {"delta", c.rl.pevi.delta},
            {"c_beta", c.rl.pevi.c_beta},
            {"w_bound", nullptr}};
  if (c.rl.pevi.w_bound) pevi["w_bound"] = *c.rl.pevi.w_bound;
  j["rl"] = Json{{"algorithm", c.rl.algorithm},
                 {"state", c.rl.state},
                 {"cql",
                  {{"hidden", q.hidden},
                   {"batch_size", q.batch_size},
                   {"learning_rate", q.learning_rate},
                   {"dropout", q.dropout},
                   {"psi", q.psi},
                   {"alpha", q.alpha},
                   {"max_steps", q.max_steps},
                   {"steps_per_epoch", q.steps_per_epoch},
                   {"patience", q.patience},
                   {"min_delta", q.min_delta}}},
                 {"pevi", std::move(pevi)}};
  j["eval"] = Json{{"horizon", c.eval.horizon}, {"runs", c.eval.runs}, {"policies", c.eval.policies}};
  return j;
}

RunConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t stage_seed(const RunConfig& config, const char* label) { return derive_seed(config.seed, label); }

namespace artifact {
std::string member_params(int p) { return "params_" + std::to_string(p) + ".json"; }
std::string member_transitions(int p) { return "transitions_" + std::to_string(p) + ".jsonl"; }
std::string member_model(int p) { return "model_" + std::to_string(p) + ".json"; }
}  // namespace artifact

SisConfig load_environment(const RunConfig& config, const fs::path& out) {
  Graph graph = read_graph(out);
  std::ifstream pin(out / artifact::partition);
  if (!pin) throw std::runtime_error("missing " + (out / artifact::partition).string() + "; run gen-sbm first");
  BinPartition partition = load_partition(pin, graph.node_count());
  const int k = partition.bin_count();
  return SisConfig(std::move(graph), std::move(partition), per_bin(config.sis.spread, k, "spread"),
                   per_bin(config.sis.churn, k, "churn"));
}

void cmd_gen(const RunConfig& config, const fs::path& out) {
  fs::create_directories(out);
  Graph graph;
  BinPartition partition;
  if (config.graph.source == "sbm") {
    auto sbm = gen_sbm(config.graph.blocks, config.graph.p_in, config.graph.p_out, stage_seed(config, "graph"));
    graph = std::move(sbm.graph);
    partition = std::move(sbm.blocks);
  } else {
    std::ifstream in(config.graph.edge_list);
    if (!in) throw std::runtime_error("cannot open edge list " + config.graph.edge_list);
    auto loaded = load_edge_list(in);
    graph = std::move(loaded.graph);
    if (!config.graph.partition.empty()) {
      std::ifstream pin(config.graph.partition);
      if (!pin) throw std::runtime_error("cannot open partition " + config.graph.partition);
      partition = load_partition(pin, graph.node_count());
    } else {
      partition = detect_communities(graph, config.graph.community_min_size).partition;
    }
  }
  write_graph(out / artifact::graph, graph);
  write_stream_atomic(out / artifact::partition, [&](std::ostream& os) { write_partition(os, partition); });
}

Panel cmd_simulate(const RunConfig& config, const fs::path& out) {
  const SisConfig env = load_environment(config, out);
  const PolicyPtr logging = named_policy(config.panel.logging_policy, env, out);
  const Panel panel = generate_panel(env, as_controller(logging, env.graph, env.partition), config.panel.periods,
                                     stage_seed(config, "panel"));
  write_stream_atomic(out / artifact::panel, [&](std::ostream& os) { write_panel(os, panel); });
  return panel;
}

void cmd_fit(const RunConfig& config, const fs::path& out) {
  const SisConfig env = load_environment(config, out);
  const Panel panel = read_panel_file(out);
  const EmvsResult mode = fit_emvs(panel, env.graph, env.partition, config.ising.priors);
  Json params = to_json(mode.params);
  write_json_file(out / artifact::params, params);
  if (config.ising.estimator == "mcmc") {
    const auto draws = sample_posterior(panel, env.graph, env.partition, config.ising.priors, config.ising.draws,
                                        config.ising.tune, stage_seed(config, "fit"));
    write_json_file(out / artifact::draws, to_json(draws));
  } else {
    fs::remove(out / artifact::draws);
  }
}

int cmd_train(const RunConfig& config, const fs::path& out) {
  const SisConfig env = load_environment(config, out);
  const Panel panel = read_panel_file(out);
  std::vector<IsingParams> members;
  if (config.ising.estimator == "mcmc") {
    members = draws_from_json(read_json_file(out / artifact::draws)).draws;
  } else {
    members.push_back(params_from_json(read_json_file(out / artifact::params)));
  }

  const bool plain = config.rl.state == "plain";
  const std::uint64_t train_root = stage_seed(config, "train");
  Json member_specs = Json::array();
  for (std::size_t p = 0; p < members.size(); ++p) {
    const int idx = static_cast<int>(p);
    write_json_file(out / artifact::member_params(idx), to_json(members[p]));
    const StateBuilder builder = plain ? StateBuilder::plain() : StateBuilder(members[p]);
    const TransitionSet set = build_transitions(panel, builder, env.graph, env.partition);
    write_stream_atomic(out / artifact::member_transitions(idx), [&](std::ostream& os) {
      for (const auto& t : set.transitions) os << to_json(t).dump() << '\n';
    });

    const std::uint64_t seed = derive_seed(train_root, static_cast<std::uint64_t>(p));
    Json spec;
    if (config.rl.algorithm == "cql") {
      const QFunction q = train_cql(set.transitions, config.rl.cql, seed);
      write_json_file(out / artifact::member_model(idx), to_json(q));
      spec["kind"] = "learned_q";
    } else {
      const int horizon = config.rl.pevi.horizon;
      const int k = env.partition.bin_count();
      const int d = feature_dim(k);
      const auto stages = pevi_stage_datasets(set.transitions, horizon);
      const double w = config.rl.pevi.w_bound.value_or(horizon * std::sqrt(static_cast<double>(d)));
      const double n_log = static_cast<double>(set.transitions.size()) / horizon;
      const double beta =
          bonus_beta_from_radius(horizon, d, n_log, config.rl.pevi.lambda, config.rl.pevi.delta, w, config.rl.pevi.c_beta);
      const PeviPolicy policy = train_pevi(stages, d, config.rl.pevi.lambda, beta);
      write_json_file(out / artifact::member_model(idx), to_json(policy));
      spec["kind"] = "pevi";
    }
    spec["config"] = Json{{"model", artifact::member_model(idx)}, {"state", config.rl.state}};
    if (!plain) spec["config"]["params"] = artifact::member_params(idx);
    member_specs.push_back(std::move(spec));
  }

  Json policy = member_specs.size() == 1 ? member_specs.front()
                                         : Json{{"kind", "ensemble"}, {"config", {{"members", member_specs}}}};
  write_json_file(out / artifact::policy, policy);
  return static_cast<int>(members.size());
}

EvalReport cmd_eval(const RunConfig& config, const fs::path& out) {
  const SisConfig env = load_environment(config, out);
  std::vector<NamedPolicy> policies;
  for (const auto& name : config.eval.policies) policies.push_back({name, named_policy(name, env, out)});
  EvalReport report =
      evaluate(env, policies, config.eval.horizon, config.eval.runs, stage_seed(config, "eval"), config.threads);
  write_json_file(out / artifact::report_json, to_json(report));
  write_stream_atomic(out / artifact::report_csv, [&](std::ostream& os) { write_report_csv(os, report); });
  return report;
}

EvalReport cmd_ensemble(RunConfig config, const fs::path& out) {
  config.ising.estimator = "mcmc";
  cmd_fit(config, out);
  cmd_train(config, out);
  return cmd_eval(config, out);
}

}  // namespace qising
