#include "qising/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qising {

namespace {

Json matrix_rows(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const Json& rows, Eigen::Index expect_rows, Eigen::Index expect_cols) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != expect_rows) {
    throw std::invalid_argument("matrix has the wrong number of rows");
  }
  Eigen::MatrixXd m(expect_rows, expect_cols);
  for (Eigen::Index i = 0; i < expect_rows; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != expect_cols) throw std::invalid_argument("matrix row has the wrong length");
    for (Eigen::Index j = 0; j < expect_cols; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

Json flat_row_major(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

Json vector_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Json to_json(const IsingParams& params) {
  Json j;
  j["beta0"] = params.beta0;
  j["beta1"] = params.beta1;
  j["beta2"] = params.beta2;
  j["beta3"] = params.beta3;
  j["gamma"] = matrix_rows(params.gamma);
  return j;
}

IsingParams params_from_json(const Json& j) {
  IsingParams p;
  p.beta0 = j.at("beta0").get<std::vector<double>>();
  p.beta1 = j.at("beta1").get<std::vector<double>>();
  p.beta2 = j.at("beta2").get<std::vector<double>>();
  p.beta3 = j.at("beta3").get<std::vector<double>>();
  const auto k = static_cast<Eigen::Index>(p.beta0.size());
  if (static_cast<Eigen::Index>(p.beta1.size()) != k || static_cast<Eigen::Index>(p.beta2.size()) != k ||
      static_cast<Eigen::Index>(p.beta3.size()) != k) {
    throw std::invalid_argument("IsingParams: coefficient vectors differ in length");
  }
  p.gamma = matrix_from_rows(j.at("gamma"), k, k);
  return p;
}

Json to_json(const PosteriorDraws& draws) {
  Json j;
  j["n_tune"] = draws.n_tune;
  j["seed"] = draws.seed;
  j["step_size"] = draws.step_size;
  j["accept_rate"] = draws.accept_rate;
  j["divergences"] = draws.divergences;
  j["flagged"] = draws.flagged;
  Json arr = Json::array();
  for (const auto& d : draws.draws) arr.push_back(to_json(d));
  j["draws"] = std::move(arr);
  return j;
}

PosteriorDraws draws_from_json(const Json& j) {
  PosteriorDraws d;
  d.n_tune = j.at("n_tune").get<int>();
  d.seed = j.at("seed").get<std::uint64_t>();
  d.step_size = j.value("step_size", 0.0);
  d.accept_rate = j.value("accept_rate", 0.0);
  d.divergences = j.value("divergences", 0);
  d.flagged = j.value("flagged", false);
  for (const auto& item : j.at("draws")) d.draws.push_back(params_from_json(item));
  if (d.draws.empty()) throw std::invalid_argument("PosteriorDraws: no draws");
  return d;
}

Json to_json(const QFunction& q) {
  Json j;
  j["state_dim"] = q.state_dim();
  j["n_actions"] = q.n_actions();
  j["hidden"] = q.hidden();
  j["activation"] = "relu";
  j["psi"] = q.psi;
  j["alpha"] = q.alpha;
  j["seed"] = q.seed;
  Json layers = Json::array();
  for (const auto& l : q.layers()) {
    Json layer;
    layer["in"] = l.weight.cols();
    layer["out"] = l.weight.rows();
    layer["weight"] = flat_row_major(l.weight);
    layer["bias"] = vector_json(l.bias);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  return j;
}

QFunction qfunction_from_json(const Json& j) {
  if (j.value("activation", std::string("relu")) != "relu") throw std::invalid_argument("QFunction: unsupported activation");
  QFunction q(j.at("state_dim").get<int>(), j.at("hidden").get<std::vector<int>>(), j.at("n_actions").get<int>(), 0);
  q.psi = j.at("psi").get<double>();
  q.alpha = j.at("alpha").get<double>();
  q.seed = j.at("seed").get<std::uint64_t>();
  const auto& layers = j.at("layers");
  if (layers.size() != q.layers().size()) throw std::invalid_argument("QFunction: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& dst = q.layers()[l];
    const auto w = layers[l].at("weight").get<std::vector<double>>();
    const auto b = layers[l].at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != dst.weight.size() || static_cast<Eigen::Index>(b.size()) != dst.bias.size()) {
      throw std::invalid_argument("QFunction: layer shape mismatch");
    }
    for (Eigen::Index r = 0; r < dst.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < dst.weight.cols(); ++c) {
        dst.weight(r, c) = w[static_cast<std::size_t>(r * dst.weight.cols() + c)];
      }
    }
    dst.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  }
  return q;
}

Json to_json(const PeviPolicy& policy) {
  Json j;
  j["H"] = policy.horizon();
  j["lambda"] = policy.ridge();
  j["bonus_beta"] = policy.bonus_beta();
  Json stages = Json::array();
  for (int h = 0; h < policy.horizon(); ++h) {
    Json s;
    s["w"] = vector_json(policy.weights()[static_cast<std::size_t>(h)]);
    s["Lambda"] = matrix_rows(policy.lambdas()[static_cast<std::size_t>(h)]);
    stages.push_back(std::move(s));
  }
  j["stages"] = std::move(stages);
  return j;
}

PeviPolicy pevi_from_json(const Json& j) {
  std::vector<Eigen::VectorXd> weights;
  std::vector<Eigen::MatrixXd> lambdas;
  for (const auto& s : j.at("stages")) {
    weights.push_back(vector_from(s.at("w")));
    const auto d = weights.back().size();
    lambdas.push_back(matrix_from_rows(s.at("Lambda"), d, d));
  }
  if (static_cast<int>(weights.size()) != j.at("H").get<int>()) throw std::invalid_argument("PeviPolicy: stage count != H");
  return PeviPolicy(std::move(weights), std::move(lambdas), j.at("lambda").get<double>(), j.at("bonus_beta").get<double>());
}

Json to_json(const QIsingState& s) { return Json{{"l0_bar", s.l0_bar}, {"y_bar", s.y_bar}}; }

Json to_json(const Transition& t) {
  return Json{{"s", to_json(t.s)}, {"b", t.b}, {"r", t.r}, {"s_next", to_json(t.s_next)}};
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace qising
