#include <cmath>
#include <sstream>

#include "cfx/chem/random_molecule.hpp"
#include "cfx/chem/smiles.hpp"
#include "cfx/fragvocab/vocab.hpp"
#include "cfx/ppo/ppo.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cfx;

namespace {

const chem::ElementSet kCNO = chem::ElementSet::from_symbols({"C", "N", "O"});

std::vector<chem::Molecule> corpus(std::uint64_t seed, int n) {
  nk::Rng rng(seed);
  chem::RandomMoleculeOptions opt;
  opt.min_atoms = 3;
  opt.max_atoms = 7;
  opt.element_weights = {{6, 10.0}, {7, 2.0}, {8, 2.0}};
  std::vector<chem::Molecule> out;
  for (int i = 0; i < n; ++i) out.push_back(chem::random_molecule(rng, opt));
  return out;
}

struct World {
  std::vector<chem::Molecule> mols = corpus(5, 40);
  fragvocab::FragmentVocab vocab = fragvocab::mine_vocab(mols, 20);
  genvae::VaeModel vae;
  gnn::GnnModel gnn{kCNO, {8, 2, gnn::UpdateMode::Concat}, 3};
  explain::Scorer scorer;

  World()
      : vae(vocab, kCNO, tiny(), 7),
        scorer({mols.begin(), mols.begin() + 6}, gnn, 1) {}

  static genvae::VaeConfig tiny() {
    genvae::VaeConfig c;
    c.latent = 6;
    c.trunk = {8, 2, gnn::UpdateMode::Concat};
    c.frag_embed = 5;
    c.dec_hidden = 7;
    c.atom_embed = 6;
    c.pair_hidden = 5;
    return c;
  }

  adapter::AdapterModel policy(std::uint64_t seed) const {
    return adapter::AdapterModel({vae.graph_width(), 12, vae.config().latent, 0.5}, seed);
  }
};

genvae::DecodeOptions fast_decode() {
  genvae::DecodeOptions d;
  d.beam = 2;
  return d;
}

std::vector<ppo::Transition> synthetic_batch(const adapter::AdapterModel& model, std::size_t n, nk::Rng& rng) {
  std::vector<ppo::Transition> out(n);
  for (auto& t : out) {
    t.h_graph.resize(model.config().input);
    for (auto& x : t.h_graph) x = rng.normal();
    auto d = model.policy_dist(t.h_graph);
    t.action = adapter::sample_action(d, rng);
    t.old_log_prob = adapter::log_prob(d, t.action);
    t.q = rng.uniform(0.0, 3.0);
    t.v = model.critic_value(t.h_graph);
  }
  return out;
}

std::vector<const ppo::Transition*> pointers(const std::vector<ppo::Transition>& v) {
  std::vector<const ppo::Transition*> p;
  for (const auto& t : v) p.push_back(&t);
  return p;
}

}  // namespace

TEST_CASE("clipped surrogate point values") {
  CHECK(ppo::clipped_surrogate(1.0, 0.7, 0.2) == 0.7);
  CHECK(ppo::clipped_surrogate(2.0, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(ppo::clipped_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-15));
  nk::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    double r = std::exp(rng.normal()), a = 3.0 * rng.normal();
    double s = ppo::clipped_surrogate(r, a, 0.2);
    if (s > 0) CHECK(s <= 1.2 * std::abs(a) + 1e-12);
  }
}

TEST_CASE("at unit ratio the surrogate gradient is the vanilla policy gradient") {
  adapter::AdapterModel model({6, 10, 4, 0.5}, 2);
  nk::Rng rng(3);
  for (auto& [name, p] : model.params())
    for (auto& v : p.value.vec()) v += 0.2 * rng.normal();
  auto batch = synthetic_batch(model, 16, rng);
  auto ptrs = pointers(batch);

  model.params().zero_grad();
  {
    nk::Tape tape;
    tape.backward(ppo::surrogate_loss(tape, model, ptrs, 0.2, true));
  }
  std::map<std::string, std::vector<double>> g1;
  for (auto& [name, p] : model.params()) g1[name] = p.grad.vec();

  model.params().zero_grad();
  {
    const auto adv = ppo::normalized_advantages(ptrs);
    nk::Tensor h = nk::Tensor::matrix(16, 6), a = nk::Tensor::matrix(16, 4), w = nk::Tensor::matrix(16, 1);
    for (std::size_t i = 0; i < 16; ++i) {
      for (std::size_t j = 0; j < 6; ++j) h.at(i, j) = batch[i].h_graph[j];
      for (std::size_t j = 0; j < 4; ++j) a.at(i, j) = batch[i].action[j];
      w[i] = adv[i];
    }
    nk::Tape tape;
    auto lp = model.log_prob(tape, h, a, true);
    tape.backward(nk::neg(nk::mean(nk::mul(lp, tape.constant(w)))));
  }
  double worst = 0.0;
  for (auto& [name, p] : model.params())
    for (std::size_t i = 0; i < p.grad.size(); ++i) worst = std::max(worst, std::abs(p.grad[i] - g1[name][i]));
  CHECK(worst < 1e-5);
}

TEST_CASE("advantages are normalized per batch") {
  adapter::AdapterModel model({6, 10, 4, 0.5}, 2);
  nk::Rng rng(4);
  auto batch = synthetic_batch(model, 9, rng);
  auto a = ppo::normalized_advantages(pointers(batch));
  double m = 0.0, v = 0.0;
  for (double x : a) m += x;
  m /= 9;
  for (double x : a) v += (x - m) * (x - m);
  CHECK(std::abs(m) < 1e-12);
  CHECK(v / 9 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("a moderate update stays under the KL limit and moves the policy") {
  adapter::AdapterModel model({6, 10, 4, 0.5}, 5);
  nk::Rng rng(6);
  auto batch = synthetic_batch(model, 32, rng);
  auto before = model.export_tensors();
  nk::Adam opt(1e-3);
  auto d = ppo::ppo_update(pointers(batch), model, opt, {});
  CHECK_FALSE(d.aborted);
  CHECK(d.epochs_run == 4);
  CHECK(d.kl >= 0.0);
  CHECK(d.kl < 0.5);
  CHECK(d.mean_ratio > 0.9);
  CHECK(model.export_tensors() != before);
}

TEST_CASE("KL guardrail reverts an oversized update") {
  adapter::AdapterModel model({6, 10, 4, 0.5}, 5);
  nk::Rng rng(7);
  auto batch = synthetic_batch(model, 32, rng);
  auto before = model.export_tensors();
  nk::Adam opt(5.0);
  auto d = ppo::ppo_update(pointers(batch), model, opt, {});
  CHECK(d.aborted);
  CHECK(d.kl > 0.5);
  CHECK(d.epochs_run == 0);
  CHECK(model.export_tensors() == before);
  CHECK(opt.steps() == 0);
}

TEST_CASE("non-finite loss aborts the update") {
  adapter::AdapterModel model({6, 10, 4, 0.5}, 5);
  nk::Rng rng(8);
  auto batch = synthetic_batch(model, 4, rng);
  batch[2].q = std::nan("");
  nk::Adam opt(1e-3);
  CHECK_THROWS_AS(ppo::ppo_update(pointers(batch), model, opt, {}), ppo::PpoError);
  CHECK_THROWS_AS(ppo::ppo_update({}, model, opt, {}), ppo::PpoError);
}

TEST_CASE("UCB scheduling") {
  ppo::UcbStats s(3);
  CHECK(s.select(1.0) == 0);
  s.record(0, 1.0);
  CHECK(s.select(1.0) == 1);
  std::vector<char> taken{0, 1, 0};
  CHECK(s.select(1.0, &taken) == 2);

  ppo::UcbStats eq(2);
  for (double x : {1.0, 1.0, 1.0, 1.0}) eq.record(0, x);
  for (double x : {0.0, 2.0, 0.0, 2.0}) eq.record(1, x);
  CHECK(eq.mean(0) == eq.mean(1));
  CHECK(eq.variance(1) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(eq.select(1.0) == 1);
  CHECK(eq.select(0.0) == 0);  // tie on mean -> lowest index

  ppo::UcbStats ex(2);
  for (double x : {0.0, 4.0}) ex.record(0, x);
  for (double x : {2.5, 2.5}) ex.record(1, x);
  CHECK(ex.select(0.0) == 1);
  CHECK(ex.select(1.0) == 0);
}

TEST_CASE("learning-rate schedule") {
  CHECK(ppo::scheduled_lr(1.0, 1, 20) == doctest::Approx(0.5));
  CHECK(ppo::scheduled_lr(1.0, 2, 20) == doctest::Approx(1.0));
  CHECK(ppo::scheduled_lr(1.0, 20, 20) == doctest::Approx(0.1));
  CHECK(ppo::scheduled_lr(1.0, 11, 20) == doctest::Approx(1.0 - 0.9 * 9.0 / 18.0));
  CHECK(ppo::scheduled_lr(2.0, 1, 1) == doctest::Approx(2.0));
}

TEST_CASE("rollouts record consistent transitions") {
  World w;
  auto policy = w.policy(11);
  nk::Rng rng(12);
  ppo::RolloutConfig cfg{1, 1, fast_decode()};
  auto ep = ppo::rollout(w.mols[0], 0, w.vae, policy, w.scorer, cfg, rng);
  REQUIRE(ep.steps.size() == 1);

  cfg.steps = 6;
  cfg.n_samples = 3;
  int failures = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    auto e = ppo::rollout(w.mols[i], i, w.vae, policy, w.scorer, cfg, rng);
    REQUIRE(e.steps.size() == 6);
    CHECK(chem::write_smiles(e.steps[0].state) == chem::write_smiles(w.mols[i]));
    for (std::size_t t = 0; t < e.steps.size(); ++t) {
      const auto& tr = e.steps[t];
      const double lp = adapter::log_prob(policy.policy_dist(tr.h_graph), tr.action);
      CHECK(std::abs(lp - tr.old_log_prob) < 1e-6);
      CHECK(std::isfinite(tr.q));
      CHECK(tr.q >= 0.0);
      CHECK(std::isfinite(tr.v));
      if (!tr.decoded) {
        ++failures;
        CHECK(tr.reward == 0.0);
      } else {
        CHECK(tr.reward == doctest::Approx(w.scorer.reward(tr.candidate)));
      }
      if (t + 1 < e.steps.size()) {
        const auto& next = e.steps[t + 1].state;
        CHECK(chem::write_smiles(next) == chem::write_smiles(tr.decoded ? tr.candidate : tr.state));
      }
    }
  }
  MESSAGE("decode failures: " << failures);
}

TEST_CASE("Q estimates") {
  World w;
  auto policy = w.policy(13);
  nk::Rng rng(14);
  auto step = adapter::chain_step(w.vae, &policy, w.mols[1], fast_decode(), rng);

  nk::Rng a(20), b(20);
  double q1 = ppo::estimate_q(w.vae, w.scorer, step.shifted, 1, fast_decode(), a);
  auto r = adapter::resample(w.vae, step.shifted, fast_decode(), b);
  CHECK(q1 == (r.ok ? w.scorer.reward(r.mol) : 0.0));
  CHECK_THROWS_AS(ppo::estimate_q(w.vae, w.scorer, step.shifted, 0, fast_decode(), a), ppo::PpoError);

  // Monte-Carlo consistency: 64 samples within two standard errors of 512.
  nk::Rng c(21);
  std::vector<double> xs;
  for (int i = 0; i < 512; ++i) xs.push_back(ppo::estimate_q(w.vae, w.scorer, step.shifted, 1, fast_decode(), c));
  double m512 = 0.0, m64 = 0.0;
  for (int i = 0; i < 512; ++i) m512 += xs[i] / 512.0;
  for (int i = 0; i < 64; ++i) m64 += xs[i] / 64.0;
  double var = 0.0;
  for (int i = 0; i < 64; ++i) var += (xs[i] - m64) * (xs[i] - m64) / 63.0;
  CHECK(std::abs(m64 - m512) <= 2.0 * std::sqrt(var / 64.0) + 1e-12);
}

TEST_CASE("adapter training is logged and deterministic") {
  World w;
  ppo::AdapterTrainConfig cfg;
  cfg.updates = 4;
  cfg.inputs_per_update = 3;
  cfg.lr = 1e-3;
  cfg.hidden = 12;
  cfg.seed = 9;
  cfg.rollout = {2, 2, fast_decode()};
  std::vector<chem::Molecule> inputs(w.mols.begin(), w.mols.begin() + 6);

  std::ostringstream log1, log2;
  auto r1 = ppo::train_adapter(inputs, w.vae, w.scorer, cfg, &log1);
  auto r2 = ppo::train_adapter(inputs, w.vae, w.scorer, cfg, &log2);
  CHECK(log1.str() == log2.str());
  CHECK(r1.model.export_tensors() == r2.model.export_tensors());
  REQUIRE(r1.curve.size() == 4);
  std::istringstream in(log1.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    for (const char* k : {"update", "mean_reward", "clip_frac", "kl", "lr"}) CHECK(j.contains(k));
    ++n;
  }
  CHECK(n == 4);
  double best = -1.0;
  for (const auto& u : r1.curve) best = std::max(best, u.mean_reward);
  CHECK(r1.best_reward == best);
}
