#include "qising/qnetwork.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qising {

QFunction::QFunction(int state_dim, std::vector<int> hidden, int n_actions, std::uint64_t init_seed)
    : state_dim_(state_dim), n_actions_(n_actions), hidden_(std::move(hidden)) {
  if (state_dim < 1 || n_actions < 1) throw std::invalid_argument("QFunction: empty input or output");
  Rng rng(init_seed);
  int fan_in = state_dim;
  std::vector<int> widths = hidden_;
  widths.push_back(n_actions);
  for (int width : widths) {
    if (width < 1) throw std::invalid_argument("QFunction: layer width must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    DenseLayer layer{Eigen::MatrixXd(width, fan_in), Eigen::VectorXd(width)};
    for (int i = 0; i < width; ++i) {
      for (int j = 0; j < fan_in; ++j) layer.weight(i, j) = bound * (2.0 * rng.uniform() - 1.0);
    }
    for (int i = 0; i < width; ++i) layer.bias(i) = bound * (2.0 * rng.uniform() - 1.0);
    layers_.push_back(std::move(layer));
    fan_in = width;
  }
  seed = init_seed;
}

Eigen::MatrixXd QFunction::forward(const Eigen::MatrixXd& states) const {
  Eigen::MatrixXd h = states;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * h;
    z.colwise() += layers_[l].bias;
    h = l + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

std::vector<double> QFunction::q_values(std::span<const double> state) const {
  if (static_cast<int>(state.size()) != state_dim_) throw std::invalid_argument("QFunction: state has wrong dimension");
  Eigen::MatrixXd s(state_dim_, 1);
  for (int i = 0; i < state_dim_; ++i) s(i, 0) = state[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd q = forward(s);
  return {q.data(), q.data() + q.size()};
}

int QFunction::greedy_action(std::span<const double> state) const {
  const auto q = q_values(state);
  int best = 0;
  for (int a = 1; a < n_actions_; ++a) {
    if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
  }
  return best;
}

std::size_t QFunction::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<double> QFunction::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) out.push_back(l.weight(i, j));
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias(i));
  }
  return out;
}

void QFunction::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("QFunction: wrong parameter count");
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = flat[k++];
    }
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = flat[k++];
  }
}

bool QFunction::operator==(const QFunction& other) const {
  if (state_dim_ != other.state_dim_ || n_actions_ != other.n_actions_ || hidden_ != other.hidden_) return false;
  if (psi != other.psi || alpha != other.alpha || seed != other.seed) return false;
  return parameters() == other.parameters();
}

Batch make_batch(std::span<const Transition> transitions) {
  if (transitions.empty()) throw std::invalid_argument("make_batch: empty");
  const auto dim = static_cast<Eigen::Index>(transitions.front().s.concat().size());
  const auto n = static_cast<Eigen::Index>(transitions.size());
  Batch batch{Eigen::MatrixXd(dim, n), {}, Eigen::VectorXd(n), Eigen::MatrixXd(dim, n)};
  batch.b.reserve(transitions.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& tr = transitions[static_cast<std::size_t>(i)];
    const auto s = tr.s.concat();
    const auto sn = tr.s_next.concat();
    for (Eigen::Index d = 0; d < dim; ++d) {
      batch.s(d, i) = s[static_cast<std::size_t>(d)];
      batch.s_next(d, i) = sn[static_cast<std::size_t>(d)];
    }
    batch.b.push_back(tr.b);
    batch.r(i) = tr.r;
  }
  return batch;
}

namespace {

Eigen::VectorXd bellman_targets(const Batch& batch, const QFunction& target_q, double psi) {
  const Eigen::MatrixXd next = target_q.forward(batch.s_next);
  return batch.r + psi * next.colwise().maxCoeff().transpose();
}

double logsumexp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

void check_loss_args(double alpha, double psi) {
  if (alpha < 0.0) throw std::invalid_argument("cql_loss: alpha must be >= 0");
  if (psi < 0.0 || psi >= 1.0) throw std::invalid_argument("cql_loss: psi must lie in [0, 1)");
}

}  // namespace

CqlLossParts cql_loss(const QFunction& q, const Batch& batch, const QFunction& target_q, double alpha, double psi) {
  check_loss_args(alpha, psi);
  const Eigen::MatrixXd values = q.forward(batch.s);
  const Eigen::VectorXd y = bellman_targets(batch, target_q, psi);
  const double n = static_cast<double>(batch.b.size());
  CqlLossParts parts;
  for (Eigen::Index i = 0; i < values.cols(); ++i) {
    const double taken = values(batch.b[static_cast<std::size_t>(i)], i);
    parts.bellman += (taken - y(i)) * (taken - y(i)) / n;
    parts.penalty += (logsumexp(values.col(i)) - taken) / n;
  }
  parts.total = parts.bellman + alpha * parts.penalty;
  return parts;
}

CqlLossParts cql_loss_grad(const QFunction& q, const Batch& batch, const QFunction& target_q, double alpha,
                           double psi, std::vector<DenseLayer>& grads, double dropout, Rng* dropout_rng) {
  check_loss_args(alpha, psi);
  const auto& layers = q.layers();
  const std::size_t depth = layers.size();
  const Eigen::Index n = batch.s.cols();

  // Forward with cached activations (post-dropout) per layer input.
  std::vector<Eigen::MatrixXd> inputs(depth);
  std::vector<Eigen::MatrixXd> masks(depth);  // ReLU * dropout scaling for hidden outputs
  Eigen::MatrixXd h = batch.s;
  for (std::size_t l = 0; l < depth; ++l) {
    inputs[l] = h;
    Eigen::MatrixXd z = layers[l].weight * h;
    z.colwise() += layers[l].bias;
    if (l + 1 < depth) {
      Eigen::MatrixXd mask = (z.array() > 0.0).cast<double>();
      if (dropout_rng != nullptr && dropout > 0.0) {
        const double keep = 1.0 - dropout;
        for (Eigen::Index j = 0; j < mask.cols(); ++j) {
          for (Eigen::Index i = 0; i < mask.rows(); ++i) {
            const bool kept = dropout_rng->uniform() < keep;
            mask(i, j) *= kept ? 1.0 / keep : 0.0;
          }
        }
      }
      h = z.cwiseProduct(mask);
      masks[l] = std::move(mask);
    } else {
      h = std::move(z);
    }
  }
  const Eigen::MatrixXd& values = h;
  const Eigen::VectorXd y = bellman_targets(batch, target_q, psi);

  CqlLossParts parts;
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(values.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int b = batch.b[static_cast<std::size_t>(i)];
    const double taken = values(b, i);
    const double td = taken - y(i);
    const double lse = logsumexp(values.col(i));
    parts.bellman += td * td * inv_n;
    parts.penalty += (lse - taken) * inv_n;
    delta.col(i) = alpha * inv_n * (values.col(i).array() - lse).exp().matrix();
    delta(b, i) += 2.0 * td * inv_n - alpha * inv_n;
  }
  parts.total = parts.bellman + alpha * parts.penalty;

  grads.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    grads[l].weight = delta * inputs[l].transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) delta = (layers[l].weight.transpose() * delta).cwiseProduct(masks[l - 1]);
  }
  return parts;
}

namespace {

struct Adam {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;
  std::vector<DenseLayer> m, v;

  explicit Adam(const QFunction& q, double rate) : lr(rate) {
    for (const auto& l : q.layers()) {
      m.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    v = m;
  }

  void update(QFunction& q, const std::vector<DenseLayer>& g) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    auto apply = [&](auto& param, const auto& grad, auto& mom, auto& var) {
      mom = beta1 * mom + (1.0 - beta1) * grad;
      var = beta2 * var + (1.0 - beta2) * grad.cwiseProduct(grad);
      param.array() -= lr * (mom.array() / c1) / ((var.array() / c2).sqrt() + eps);
    };
    auto& layers = q.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      apply(layers[l].weight, g[l].weight, m[l].weight, v[l].weight);
      apply(layers[l].bias, g[l].bias, m[l].bias, v[l].bias);
    }
  }
};

}  // namespace

QFunction train_cql(std::span<const Transition> dataset, const CqlHyper& hyper, std::uint64_t seed,
                    CqlReport* report) {
  if (dataset.empty()) throw std::invalid_argument("train_cql: empty dataset");
  if (hyper.batch_size < 1 || hyper.steps_per_epoch < 1 || hyper.max_steps < 1) {
    throw std::invalid_argument("train_cql: batch size, epoch length and step budget must be positive");
  }
  const int state_dim = static_cast<int>(dataset.front().s.concat().size());
  const int n_actions = dataset.front().s.bin_count();
  for (const auto& tr : dataset) {
    if (tr.b < 0 || tr.b >= n_actions) throw std::invalid_argument("train_cql: action outside [0, K)");
  }
  const Rng root(seed);
  QFunction q(state_dim, hyper.hidden, n_actions, root.child("init").key());
  q.psi = hyper.psi;
  q.alpha = hyper.alpha;
  q.seed = seed;
  QFunction target = q;
  Adam adam(q, hyper.learning_rate);
  Rng sampler = root.child("minibatch");
  Rng dropout_rng = root.child("dropout");

  CqlReport local;
  CqlReport& rep = report != nullptr ? *report : local;
  rep = {};
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::vector<Transition> picked(static_cast<std::size_t>(hyper.batch_size));
  std::vector<DenseLayer> grads;
  double epoch_sum = 0.0;
  int epoch_steps = 0;
  while (rep.steps < hyper.max_steps) {
    for (auto& slot : picked) slot = dataset[sampler.below(dataset.size())];
    const Batch batch = make_batch(picked);
    const auto parts = cql_loss_grad(q, batch, target, hyper.alpha, hyper.psi, grads, hyper.dropout, &dropout_rng);
    if (!std::isfinite(parts.total)) {
      throw std::runtime_error("train_cql: non-finite loss at step " + std::to_string(rep.steps) +
                               " (bellman=" + std::to_string(parts.bellman) +
                               ", penalty=" + std::to_string(parts.penalty) + ")");
    }
    adam.update(q, grads);
    ++rep.steps;
    epoch_sum += parts.bellman;
    ++epoch_steps;
    if (epoch_steps == hyper.steps_per_epoch || rep.steps == hyper.max_steps) {
      const double loss = epoch_sum / epoch_steps;
      rep.epoch_td_loss.push_back(loss);
      ++rep.epochs;
      epoch_sum = 0.0;
      epoch_steps = 0;
      target = q;
      if (best - loss < hyper.min_delta) {
        if (++stale >= hyper.patience) {
          rep.stopped_early = true;
          break;
        }
      } else {
        stale = 0;
      }
      best = std::min(best, loss);
    }
  }
  return q;
}

}  // namespace qising
