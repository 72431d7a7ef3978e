#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cfx/chem/canonical.hpp"
#include "cfx/chem/random_molecule.hpp"
#include "cfx/chem/smiles.hpp"
#include "cfx/chem/validity.hpp"
#include "cfx/genvae/vae.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace cfx;

namespace {

std::vector<chem::Molecule> small_corpus(std::uint64_t seed, int n) {
  nk::Rng rng(seed);
  chem::RandomMoleculeOptions opt;
  opt.min_atoms = 3;
  opt.max_atoms = 8;
  opt.element_weights = {{6, 10.0}, {7, 2.0}, {8, 2.0}};
  std::vector<chem::Molecule> out;
  for (int i = 0; i < n; ++i) out.push_back(chem::random_molecule(rng, opt));
  return out;
}

genvae::VaeConfig tiny_config() {
  genvae::VaeConfig c;
  c.latent = 6;
  c.trunk = {8, 2, gnn::UpdateMode::Concat};
  c.frag_embed = 5;
  c.dec_hidden = 7;
  c.atom_embed = 6;
  c.pair_hidden = 5;
  return c;
}

const chem::ElementSet kCNO = chem::ElementSet::from_symbols({"C", "N", "O"});

// Likelihood re-derived from the stored logits alone.
double trace_log_likelihood(const genvae::DecodeTrace& tr, std::size_t vocab_size) {
  auto lsm = [](std::vector<double> x, std::size_t k) {
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return x[k] - m - std::log(s);
  };
  double ll = 0.0;
  for (std::size_t t = 0; t < tr.step_logits.size(); ++t) {
    auto row = tr.step_logits[t];
    if (t == 0) row[vocab_size] = -1e9;
    const std::size_t target = t < tr.tokens.size() ? static_cast<std::size_t>(tr.tokens[t]) : vocab_size;
    ll += lsm(row, target);
  }
  for (std::size_t p = 0; p < tr.pairs.size(); ++p)
    ll += lsm(tr.pair_logits[p], static_cast<std::size_t>(tr.pair_class[p]));
  return ll;
}

}  // namespace

TEST_CASE("kl divergence closed form") {
  genvae::LatentGaussian g{std::vector<double>(56, 0.0), std::vector<double>(56, 0.0)};
  CHECK(genvae::kl_divergence(g) == 0.0);
  g.mu[0] = 1.0;
  CHECK(genvae::kl_divergence(g) == doctest::Approx(0.5).epsilon(1e-15));
  nk::Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    for (auto& v : g.mu) v = rng.normal() * 2.0;
    for (auto& v : g.log_sigma) v = rng.normal() * 2.0;
    CHECK(genvae::kl_divergence(g) >= 0.0);
  }
}

TEST_CASE("latent sampling") {
  genvae::LatentGaussian g{{0.3, -1.2, 2.0}, {-20.0, -20.0, -20.0}};
  nk::Rng rng(1);
  const auto z = genvae::sample_latent(g, rng);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(z[i] - g.mu[i]) < 1e-6);

  genvae::LatentGaussian h{{0.5, -0.25}, {std::log(2.0), 0.0}};
  nk::Rng a(77);
  std::vector<double> mean(2, 0.0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto s = genvae::sample_latent(h, a);
    mean[0] += s[0] / n;
    mean[1] += s[1] / n;
  }
  CHECK(std::abs(mean[0] - 0.5) < 3.0 * 2.0 / 100.0);
  CHECK(std::abs(mean[1] + 0.25) < 3.0 * 1.0 / 100.0);

  nk::Rng b1(5), b2(5);
  CHECK(genvae::sample_latent(h, b1) == genvae::sample_latent(h, b2));
}

TEST_CASE("encoder output shape, determinism and permutation invariance") {
  const auto corpus = small_corpus(2, 40);
  const auto vocab = fragvocab::mine_vocab(corpus, 20);
  genvae::VaeModel model(vocab, kCNO, {}, 4);
  nk::Rng rng(8);
  for (const auto& m : corpus) {
    const auto e = model.encode(m);
    CHECK(e.latent.mu.size() == 56);
    CHECK(e.latent.log_sigma.size() == 56);
    CHECK(e.h_graph.size() == model.graph_width());
    const auto again = model.encode(m);
    CHECK(again.latent.mu == e.latent.mu);
    const auto p = model.encode(m.permuted(chem::random_permutation(rng, m.atom_count())));
    for (std::size_t i = 0; i < 56; ++i) {
      CHECK(std::abs(p.latent.mu[i] - e.latent.mu[i]) < 1e-12);
      CHECK(std::abs(p.latent.log_sigma[i] - e.latent.log_sigma[i]) < 1e-12);
    }
  }
}

TEST_CASE("examples follow the smallest-atom fragment order") {
  const auto corpus = small_corpus(2, 60);
  const auto vocab = fragvocab::mine_vocab(corpus, 30);
  for (const auto& m : corpus) {
    const auto ex = genvae::make_example(m, vocab);
    std::size_t atoms = 0, inter = 0;
    for (int t : ex.tokens) atoms += vocab[t].pattern.atom_count();
    for (int c : ex.pair_class) inter += c != 0 ? 1 : 0;
    CHECK(atoms == m.atom_count());
    std::size_t intra = 0;
    for (int t : ex.tokens) intra += vocab[t].pattern.bond_count();
    CHECK(intra + inter == m.bond_count());
  }
}

TEST_CASE("forcing STOP after one fragment yields that fragment") {
  const auto corpus = small_corpus(9, 50);
  const auto vocab = fragvocab::mine_vocab(corpus, 25);
  genvae::VaeModel model(vocab, kCNO, {}, 1);
  const std::vector<double> z(56, 0.1);
  for (int id = 0; id < static_cast<int>(vocab.size()); ++id) {
    for (auto mode : {genvae::DecodeMode::Beam, genvae::DecodeMode::Sample}) {
      genvae::DecodeOptions opt;
      opt.mode = mode;
      opt.forced = {id, vocab.stop_id()};
      nk::Rng rng(1);
      const auto res = model.decode(z, opt, rng);
      REQUIRE(res.ok);
      CHECK(chem::canonical_key(res.mol) == vocab[id].key);
      CHECK(res.trace.tokens == std::vector<int>{id});
      CHECK(res.trace.stopped);
    }
  }
}

TEST_CASE("decodes are valid and their likelihood is recomputable") {
  const auto corpus = small_corpus(4, 60);
  const auto vocab = fragvocab::mine_vocab(corpus, 30);
  genvae::VaeModel model(vocab, kCNO, {}, 2);
  nk::Rng rng(10);
  int ok = 0;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> z(56);
    for (auto& v : z) v = rng.normal();
    genvae::DecodeOptions opt;
    opt.mode = i % 2 ? genvae::DecodeMode::Sample : genvae::DecodeMode::Beam;
    const auto res = model.decode(z, opt, rng);
    REQUIRE(!res.trace.tokens.empty());
    CHECK(static_cast<int>(res.trace.tokens.size()) <= model.config().n_max);
    if (res.ok) {
      ++ok;
      CHECK(chem::is_valid(res.mol));
    }
    CHECK(std::abs(trace_log_likelihood(res.trace, vocab.size()) - res.trace.log_likelihood) < 1e-5);
    CHECK(std::abs(model.log_likelihood(z, res.trace.tokens, res.trace.pair_class) - res.trace.log_likelihood) <
          1e-5);
  }
  CHECK(ok > 0);
}

TEST_CASE("beam decoding is deterministic and sampling is seeded") {
  const auto corpus = small_corpus(4, 40);
  const auto vocab = fragvocab::mine_vocab(corpus, 20);
  genvae::VaeModel model(vocab, kCNO, {}, 2);
  std::vector<double> z(56, -0.3);
  nk::Rng r1(1), r2(2);
  const auto a = model.decode(z, {}, r1);
  const auto b = model.decode(z, {}, r2);
  CHECK(a.trace.tokens == b.trace.tokens);
  CHECK(a.trace.pair_class == b.trace.pair_class);
  genvae::DecodeOptions s;
  s.mode = genvae::DecodeMode::Sample;
  nk::Rng s1(9), s2(9);
  CHECK(model.decode(z, s, s1).trace.tokens == model.decode(z, s, s2).trace.tokens);
  CHECK_THROWS_AS(model.decode(std::vector<double>(3, 0.0), {}, s1), genvae::VaeError);
}

TEST_CASE("elbo gradients match finite differences with common random numbers") {
  const auto corpus = small_corpus(6, 30);
  const auto vocab = fragvocab::mine_vocab(corpus, 12);
  for (auto mode : {gnn::UpdateMode::Concat, gnn::UpdateMode::Additive}) {
    auto cfg = tiny_config();
    cfg.trunk.update = mode;
    genvae::VaeModel model(vocab, kCNO, cfg, 3);
    std::vector<genvae::Example> exs;
    for (int i = 0; i < 3; ++i) exs.push_back(genvae::make_example(corpus[static_cast<std::size_t>(i)], vocab));
    std::vector<const genvae::Example*> batch;
    for (const auto& e : exs) batch.push_back(&e);
    nk::Rng rng(4);
    nk::Tensor eps = nk::Tensor::matrix(3, cfg.latent);
    for (auto& v : eps.vec()) v = rng.normal();
    auto check = testing::gradcheck(model.params(), [&](nk::Tape& tape) {
      return model.elbo(tape, batch, eps, true).loss;
    });
    INFO("worst tensor: " << check.worst);
    CHECK(check.max_rel_err < 1e-3);
  }
}

TEST_CASE("training reconstructs fragments and reloads exactly") {
  const auto corpus = small_corpus(31, 300);
  const auto vocab = fragvocab::mine_vocab(corpus, 40);
  std::vector<genvae::Example> exs;
  for (const auto& m : corpus) exs.push_back(genvae::make_example(m, vocab));

  std::vector<genvae::VaeTrainResult> results;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    genvae::VaeTrainConfig tc;
    tc.seed = seed;
    results.push_back(genvae::train_vae(corpus, vocab, kCNO, {}, tc));
  }

  std::vector<double> accs;
  for (const auto& r : results) {
    REQUIRE(!r.curve.empty());
    double best = r.curve.front().loss;
    for (const auto& e : r.curve) best = std::min(best, e.loss);
    CHECK(best <= 0.7 * r.curve.front().loss);
    accs.push_back(genvae::token_accuracy(r.model, exs));
  }
  std::sort(accs.begin(), accs.end());
  MESSAGE("teacher-forced token accuracy, 5-seed median " << accs[2]);
  CHECK(accs[2] >= 0.8);

  const auto& model = results.front().model;
  const auto path = std::filesystem::temp_directory_path() / "cfx_test_vae.cfxm";
  model.save(path);
  const auto loaded = genvae::VaeModel::load(path, vocab);
  std::vector<const genvae::Example*> probe;
  for (std::size_t i = 0; i < 16; ++i) probe.push_back(&exs[i]);
  nk::Rng rng(2);
  nk::Tensor eps = nk::Tensor::matrix(16, 56);
  for (auto& v : eps.vec()) v = rng.normal();
  nk::Tape t1(false), t2(false);
  CHECK(model.elbo(t1, probe, eps, false).loss.item() == loaded.elbo(t2, probe, eps, false).loss.item());
  std::filesystem::remove(path);

  CHECK_THROWS_AS(genvae::train_vae({}, vocab, kCNO, {}, {}), genvae::VaeError);
}
