#include "cfx/ppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

namespace cfx::ppo {

double Episode::mean_reward() const {
  if (steps.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : steps) s += t.reward;
  return s / static_cast<double>(steps.size());
}

static double score_or_zero(const explain::Scorer& scorer, const genvae::DecodeResult& r) {
  return r.ok ? scorer.reward(r.mol) : 0.0;
}

double estimate_q(const genvae::VaeModel& vae, const explain::Scorer& scorer, const genvae::LatentGaussian& shifted,
                  int n_samples, const genvae::DecodeOptions& decode, nk::Rng& rng) {
  if (n_samples < 1) throw PpoError("n_samples must be positive");
  double s = 0.0;
  for (int i = 0; i < n_samples; ++i) s += score_or_zero(scorer, adapter::resample(vae, shifted, decode, rng));
  return s / n_samples;
}

Episode rollout(const chem::Molecule& input, std::size_t input_index, const genvae::VaeModel& vae,
                const adapter::AdapterModel& policy, const explain::Scorer& scorer, const RolloutConfig& config,
                nk::Rng& rng) {
  if (config.steps < 1) throw PpoError("rollout needs at least one step");
  if (config.n_samples < 1) throw PpoError("n_samples must be positive");
  Episode ep;
  ep.input = input_index;
  chem::Molecule state = input;
  for (int t = 0; t < config.steps; ++t) {
    auto step = adapter::chain_step(vae, &policy, state, config.decode, rng, adapter::ActionMode::Sample);
    Transition tr;
    tr.state = state;
    tr.h_graph = step.encoding.h_graph;
    tr.action = step.action;
    tr.old_log_prob = step.log_prob;
    tr.decoded = step.decoded.ok;
    tr.reward = score_or_zero(scorer, step.decoded);
    tr.v = policy.critic_value(tr.h_graph);
    tr.q = tr.reward;
    if (config.n_samples > 1) {
      double rest = estimate_q(vae, scorer, step.shifted, config.n_samples - 1, config.decode, rng);
      tr.q = (tr.reward + rest * (config.n_samples - 1)) / config.n_samples;
    }
    if (step.decoded.ok) {
      tr.candidate = step.decoded.mol;
      state = step.decoded.mol;
    }
    ep.steps.push_back(std::move(tr));
  }
  return ep;
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  double c = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, c * advantage);
}

namespace {

struct BatchTensors {
  nk::Tensor h, actions, old_lp, adv, q;
};

BatchTensors stack(const std::vector<const Transition*>& batch, const adapter::AdapterConfig& cfg) {
  const std::size_t n = batch.size();
  BatchTensors b{nk::Tensor::matrix(n, cfg.input), nk::Tensor::matrix(n, cfg.latent), nk::Tensor::matrix(n, 1),
                 nk::Tensor::matrix(n, 1), nk::Tensor::matrix(n, 1)};
  const auto adv = normalized_advantages(batch);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = *batch[i];
    if (t.h_graph.size() != cfg.input || t.action.size() != cfg.latent)
      throw PpoError("transition shape does not match the adapter");
    std::copy(t.h_graph.begin(), t.h_graph.end(), b.h.vec().begin() + static_cast<long>(i * cfg.input));
    std::copy(t.action.begin(), t.action.end(), b.actions.vec().begin() + static_cast<long>(i * cfg.latent));
    b.old_lp[i] = t.old_log_prob;
    b.q[i] = t.q;
    b.adv[i] = adv[i];
  }
  return b;
}

nk::Var surrogate(nk::Tape& tape, nk::Var lp, const BatchTensors& b, double eps) {
  nk::Var ratio = nk::exp(nk::sub(lp, tape.constant(b.old_lp)));
  nk::Var adv = tape.constant(b.adv);
  nk::Var surr = nk::minimum(nk::mul(ratio, adv), nk::mul(nk::clip(ratio, 1.0 - eps, 1.0 + eps), adv));
  return nk::neg(nk::mean(surr));
}

// k3 estimator of KL(old || new) from log-ratios, plus ratio statistics.
struct RatioStats {
  double mean_ratio = 0.0, clip_frac = 0.0, kl = 0.0;
};

RatioStats ratio_stats(const nk::Tensor& new_lp, const nk::Tensor& old_lp, double eps) {
  RatioStats s;
  const std::size_t n = new_lp.size();
  for (std::size_t i = 0; i < n; ++i) {
    double lr = new_lp[i] - old_lp[i];
    double r = std::exp(lr);
    s.mean_ratio += r;
    if (std::abs(r - 1.0) > eps) s.clip_frac += 1.0;
    s.kl += (r - 1.0) - lr;
  }
  s.mean_ratio /= n;
  s.clip_frac /= n;
  s.kl /= n;
  return s;
}

}  // namespace

std::vector<double> normalized_advantages(const std::vector<const Transition*>& batch) {
  if (batch.empty()) throw PpoError("empty PPO batch");
  const std::size_t n = batch.size();
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = batch[i]->q - batch[i]->v;
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (double& x : a) x = (x - mean) / (sd + 1e-8);
  return a;
}

nk::Var surrogate_loss(nk::Tape& tape, const adapter::AdapterModel& model, const std::vector<const Transition*>& batch,
                       double eps, bool trainable) {
  const BatchTensors b = stack(batch, model.config());
  return surrogate(tape, model.log_prob(tape, b.h, b.actions, trainable), b, eps);
}

UpdateDiagnostics ppo_update(const std::vector<const Transition*>& batch, adapter::AdapterModel& model,
                             nk::Adam& optimizer, const PpoConfig& config) {
  if (batch.empty()) throw PpoError("empty PPO batch");
  if (config.epochs < 1) throw PpoError("PPO needs at least one epoch");
  const BatchTensors b = stack(batch, model.config());
  UpdateDiagnostics diag;

  for (int e = 0; e < config.epochs; ++e) {
    auto snapshot = model.export_tensors();
    nk::Adam opt_snapshot = optimizer;

    nk::Tape tape;
    nk::Var lp = model.log_prob(tape, b.h, b.actions, true);
    nk::Var policy_loss = surrogate(tape, lp, b, config.clip);
    nk::Var value_loss = nk::mean(nk::square(nk::sub(model.values(tape, b.h, true), tape.constant(b.q))));
    nk::Var loss = nk::add(policy_loss, nk::scale(value_loss, config.value_coef));
    if (!std::isfinite(loss.item())) {
      model.params().zero_grad();
      throw PpoError("non-finite PPO loss (policy " + std::to_string(policy_loss.item()) + ", value " +
                     std::to_string(value_loss.item()) + ")");
    }
    RatioStats pre = ratio_stats(lp.value(), b.old_lp, config.clip);
    model.params().zero_grad();
    tape.backward(loss);
    optimizer.step(model.params());

    nk::Tape probe(false);
    RatioStats post = ratio_stats(model.log_prob(probe, b.h, b.actions, false).value(), b.old_lp, config.clip);
    if (!std::isfinite(post.kl) || post.kl > config.kl_limit) {
      model.import_tensors(snapshot);
      optimizer = opt_snapshot;
      diag.aborted = true;
      diag.kl = post.kl;
      break;
    }
    diag.mean_ratio = pre.mean_ratio;
    diag.clip_frac = pre.clip_frac;
    diag.kl = post.kl;
    diag.policy_loss = policy_loss.item();
    diag.value_loss = value_loss.item();
    diag.epochs_run = e + 1;
  }
  return diag;
}

UcbStats::UcbStats(std::size_t arms) : arms_(arms) {
  if (arms == 0) throw PpoError("UCB needs at least one arm");
}

void UcbStats::record(std::size_t arm, double score) {
  Arm& a = arms_.at(arm);
  a.n += 1;
  double d = score - a.mean;
  a.mean += d / static_cast<double>(a.n);
  a.m2 += d * (score - a.mean);
}

double UcbStats::variance(std::size_t arm) const {
  const Arm& a = arms_.at(arm);
  return a.n < 2 ? 0.0 : a.m2 / static_cast<double>(a.n - 1);
}

std::size_t UcbStats::select(double c, const std::vector<char>* exclude) const {
  auto skip = [&](std::size_t i) { return exclude && i < exclude->size() && (*exclude)[i]; };
  for (std::size_t i = 0; i < arms_.size(); ++i)
    if (!skip(i) && arms_[i].n == 0) return i;
  std::size_t best = arms_.size();
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < arms_.size(); ++i) {
    if (skip(i)) continue;
    double v = arms_[i].mean + c * std::sqrt(variance(i) / static_cast<double>(arms_[i].n));
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  if (best == arms_.size()) throw PpoError("every UCB arm is excluded");
  return best;
}

double scheduled_lr(double lr, int update, int total) {
  if (total < 1 || update < 1 || update > total) throw PpoError("update index out of range");
  int warm = std::max(1, static_cast<int>(std::lround(0.1 * total)));
  if (update <= warm) return lr * update / warm;
  if (total == warm) return lr;
  double frac = static_cast<double>(update - warm) / (total - warm);
  return lr - (lr - lr / 10.0) * frac;
}

AdapterTrainResult train_adapter(const std::vector<chem::Molecule>& inputs, const genvae::VaeModel& vae,
                                 const explain::Scorer& scorer, const AdapterTrainConfig& config, std::ostream* log) {
  if (inputs.empty()) throw PpoError("no input molecules");
  if (config.updates < 1) throw PpoError("updates must be positive");
  adapter::AdapterConfig acfg;
  acfg.input = vae.graph_width();
  acfg.latent = vae.config().latent;
  acfg.hidden = config.hidden;
  AdapterTrainResult res{adapter::AdapterModel(acfg, config.seed), {}, 0, 0.0,
                         -std::numeric_limits<double>::infinity()};
  adapter::AdapterModel model = res.model;
  nk::Adam opt(config.lr);
  UcbStats ucb(inputs.size());
  nk::Rng rng = nk::Rng::stream(config.seed, "ppo.rollout");
  const std::size_t per = std::min(config.inputs_per_update, inputs.size());

  for (int u = 1; u <= config.updates; ++u) {
    std::vector<char> taken(inputs.size(), 0);
    std::vector<Episode> episodes;
    for (std::size_t k = 0; k < per; ++k) {
      std::size_t i = ucb.select(config.ucb_c, &taken);
      taken[i] = 1;
      episodes.push_back(rollout(inputs[i], i, vae, model, scorer, config.rollout, rng));
      ucb.record(i, episodes.back().mean_reward());
    }
    double mean_reward = 0.0;
    std::vector<const Transition*> batch;
    for (const auto& ep : episodes) {
      mean_reward += ep.mean_reward();
      for (const auto& t : ep.steps) batch.push_back(&t);
    }
    mean_reward /= static_cast<double>(episodes.size());
    if (u == 1) res.first_reward = mean_reward;
    // The rollouts measured the policy as it stood before this update.
    if (mean_reward > res.best_reward) {
      res.best_reward = mean_reward;
      res.best_update = u;
      res.model = model;
    }

    double lr = scheduled_lr(config.lr, u, config.updates);
    opt.set_lr(lr);
    UpdateDiagnostics d = ppo_update(batch, model, opt, config.ppo);
    res.curve.push_back({u, mean_reward, d.clip_frac, d.kl, lr, d.aborted});
    if (log) {
      nlohmann::json j{{"update", u}, {"mean_reward", mean_reward}, {"clip_frac", d.clip_frac}, {"kl", d.kl},
                       {"lr", lr}};
      if (d.aborted) j["aborted"] = true;
      *log << j.dump() << '\n';
    }
  }
  return res;
}

}  // namespace cfx::ppo
