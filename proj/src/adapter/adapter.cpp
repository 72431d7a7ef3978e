#include "cfx/adapter/adapter.hpp"

#include <cmath>
#include <numbers>

#include "cfx/numkit/checkpoint.hpp"

namespace cfx::adapter {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw AdapterError(std::string("non-finite ") + what);
}

}  // namespace

double log_prob(const ActionDist& dist, const std::vector<double>& action) {
  if (action.size() != dist.mean.size()) throw AdapterError("action dimension mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) {
    const double u = (action[i] - dist.mean[i]) / dist.std[i];
    lp += -0.5 * u * u - std::log(dist.std[i]) - kHalfLog2Pi;
  }
  return lp;
}

std::vector<double> sample_action(const ActionDist& dist, nk::Rng& rng) {
  std::vector<double> a(dist.mean.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = dist.mean[i] + dist.std[i] * rng.normal();
  return a;
}

genvae::LatentGaussian shifted_latent(const genvae::LatentGaussian& g, const std::vector<double>& action) {
  if (action.size() != g.mu.size()) {
    throw AdapterError("action has " + std::to_string(action.size()) + " dims, latent has " +
                       std::to_string(g.mu.size()));
  }
  genvae::LatentGaussian out = g;
  for (std::size_t i = 0; i < action.size(); ++i) out.mu[i] += action[i];
  return out;
}

AdapterModel::AdapterModel(AdapterConfig config, std::uint64_t seed) : config_(config) {
  auto rng = nk::Rng::stream(seed, "adapter.init");
  params_.add_glorot("policy.w1", config_.input, config_.hidden, rng);
  params_.add_zeros("policy.b1", 1, config_.hidden);
  params_.add_zeros("policy.w2", config_.hidden, config_.latent);
  params_.add_zeros("policy.b2", 1, config_.latent);
  params_.add("policy.log_std", nk::Tensor({1, config_.latent}, std::log(config_.init_std)));
  params_.add_glorot("critic.w1", config_.input, config_.hidden, rng);
  params_.add_zeros("critic.b1", 1, config_.hidden);
  params_.add_glorot("critic.w2", config_.hidden, 1, rng);
  params_.add_zeros("critic.b2", 1, 1);
}

nk::Var AdapterModel::bind(nk::Tape& tape, const std::string& name, bool trainable) const {
  auto& p = params_.get(name);
  return trainable ? tape.param(p) : tape.frozen(p);
}

void AdapterModel::check_input(const std::vector<double>& h_graph) const {
  if (h_graph.size() != config_.input) {
    throw AdapterError("graph state has " + std::to_string(h_graph.size()) + " dims, adapter expects " +
                       std::to_string(config_.input));
  }
  check_finite(h_graph, "graph state");
}

nk::Var AdapterModel::mean(nk::Tape& tape, nk::Var h, bool trainable) const {
  auto P = [&](const char* n) { return bind(tape, n, trainable); };
  nk::Var hid = nk::tanh(nk::add_row(nk::matmul(h, P("policy.w1")), P("policy.b1")));
  return nk::add_row(nk::matmul(hid, P("policy.w2")), P("policy.b2"));
}

ActionDist AdapterModel::policy_dist(const std::vector<double>& h_graph) const {
  check_input(h_graph);
  nk::Tape tape(false);
  ActionDist d;
  d.mean = mean(tape, tape.constant(nk::Tensor::row(h_graph)), false).value().vec();
  for (double ls : params_.get("policy.log_std").value.data()) d.std.push_back(std::exp(ls));
  check_finite(d.mean, "policy mean");
  check_finite(d.std, "policy std");
  return d;
}

double AdapterModel::critic_value(const std::vector<double>& h_graph) const {
  check_input(h_graph);
  nk::Tape tape(false);
  const double v = values(tape, nk::Tensor::row(h_graph), false).item();
  if (!std::isfinite(v)) throw AdapterError("non-finite critic value");
  return v;
}

nk::Var AdapterModel::log_prob(nk::Tape& tape, const nk::Tensor& h, const nk::Tensor& actions,
                               bool trainable) const {
  const std::size_t n = h.rows();
  if (actions.rows() != n || actions.cols() != config_.latent) throw AdapterError("actions must be [n, latent]");
  nk::Var ls = nk::repeat_rows(bind(tape, "policy.log_std", trainable), n);
  nk::Var u = nk::mul(nk::sub(tape.constant(actions), mean(tape, tape.constant(h), trainable)), nk::exp(nk::neg(ls)));
  nk::Var lp = nk::add(nk::scale(nk::sum_cols(nk::square(u)), -0.5), nk::neg(nk::sum_cols(ls)));
  return nk::add_scalar(lp, -kHalfLog2Pi * static_cast<double>(config_.latent));
}

nk::Var AdapterModel::values(nk::Tape& tape, const nk::Tensor& h, bool trainable) const {
  auto P = [&](const char* n) { return bind(tape, n, trainable); };
  nk::Var hid = nk::tanh(nk::add_row(nk::matmul(tape.constant(h), P("critic.w1")), P("critic.b1")));
  return nk::add_row(nk::matmul(hid, P("critic.w2")), P("critic.b2"));
}

nk::NamedTensors AdapterModel::export_tensors() const {
  auto out = params_.export_tensors();
  out.emplace_back("meta.adapter", nk::Tensor::row({static_cast<double>(config_.input),
                                                    static_cast<double>(config_.hidden),
                                                    static_cast<double>(config_.latent)}));
  return out;
}

void AdapterModel::import_tensors(const nk::NamedTensors& tensors) { params_.import_tensors(tensors); }

void AdapterModel::save(const std::filesystem::path& path) const { nk::save_checkpoint(path, export_tensors()); }

AdapterModel AdapterModel::load(const std::filesystem::path& path) {
  const auto tensors = nk::load_checkpoint(path);
  for (const auto& [name, t] : tensors) {
    if (name != "meta.adapter") continue;
    if (t.size() != 3) break;
    AdapterConfig c;
    c.input = static_cast<std::size_t>(t[0]);
    c.hidden = static_cast<std::size_t>(t[1]);
    c.latent = static_cast<std::size_t>(t[2]);
    AdapterModel m(c, 0);
    m.import_tensors(tensors);
    return m;
  }
  throw nk::CheckpointError(path.string() + " is not an adapter checkpoint");
}

}  // namespace cfx::adapter
