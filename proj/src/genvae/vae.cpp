#include "cfx/genvae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "cfx/chem/validity.hpp"
#include "cfx/numkit/adam.hpp"
#include "cfx/numkit/checkpoint.hpp"
#include "json.hpp"

namespace cfx::genvae {

namespace {

constexpr double kMasked = -1e9;
constexpr int kEdgeClasses = 4;

std::vector<double> row_of(const nk::Tensor& t, std::size_t r) {
  const std::size_t c = t.cols();
  return {t.data().begin() + static_cast<std::ptrdiff_t>(r * c),
          t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
}

nk::Tensor stack_rows(const std::vector<std::vector<double>>& rows, std::size_t width) {
  nk::Tensor t = nk::Tensor::matrix(rows.size(), width);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), t.vec().begin() + static_cast<std::ptrdiff_t>(r * width));
  return t;
}

std::vector<double> log_softmax(const std::vector<double>& x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  const double lse = m + std::log(s);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
  return out;
}

struct Layout {
  std::vector<int> atom_vocab, atom_in_frag, atom_frag;
  std::vector<std::pair<int, int>> pairs;
};

Layout layout_for(const std::vector<int>& tokens, const fragvocab::FragmentVocab& vocab) {
  Layout l;
  for (std::size_t f = 0; f < tokens.size(); ++f) {
    const auto n = vocab[tokens[f]].pattern.atom_count();
    for (std::size_t i = 0; i < n; ++i) {
      l.atom_vocab.push_back(tokens[f]);
      l.atom_in_frag.push_back(static_cast<int>(i));
      l.atom_frag.push_back(static_cast<int>(f));
    }
  }
  const int n = static_cast<int>(l.atom_vocab.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (l.atom_frag[i] != l.atom_frag[j]) l.pairs.emplace_back(i, j);
  return l;
}

struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) { return p[x] == x ? x : p[x] = find(p[x]); }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    p[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

}  // namespace

std::vector<double> sample_latent(const LatentGaussian& g, nk::Rng& rng) {
  if (g.mu.size() != g.log_sigma.size()) throw VaeError("latent mu/log_sigma size mismatch");
  std::vector<double> z(g.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = g.mu[i] + std::exp(g.log_sigma[i]) * rng.normal();
  return z;
}

double kl_divergence(const LatentGaussian& g) {
  double kl = 0.0;
  for (std::size_t i = 0; i < g.mu.size(); ++i) {
    const double ls = g.log_sigma[i];
    kl += 0.5 * (g.mu[i] * g.mu[i] + std::exp(2.0 * ls) - 1.0 - 2.0 * ls);
  }
  return kl;
}

Example make_example(const chem::Molecule& mol, const fragvocab::FragmentVocab& vocab) {
  const auto dec = fragvocab::decompose(mol, vocab);
  Example ex;
  ex.mol = mol;
  for (const auto& f : dec.fragments) ex.tokens.push_back(f.vocab_id);
  const Layout l = layout_for(ex.tokens, vocab);
  std::vector<int> global;
  for (const auto& f : dec.fragments) global.insert(global.end(), f.atoms.begin(), f.atoms.end());
  ex.atom_vocab = l.atom_vocab;
  ex.atom_in_frag = l.atom_in_frag;
  ex.atom_frag = l.atom_frag;
  ex.pairs = l.pairs;
  for (auto [i, j] : l.pairs) ex.pair_class.push_back(mol.bond_order(global[i], global[j]));
  return ex;
}

VaeModel::VaeModel(fragvocab::FragmentVocab vocab, chem::ElementSet elements, VaeConfig config,
                   std::uint64_t seed)
    : vocab_(std::move(vocab)), elements_(std::move(elements)), config_(config) {
  if (vocab_.size() == 0) throw VaeError("empty fragment vocabulary");
  auto rng = nk::Rng::stream(seed, "vae.init");
  const std::size_t H = config_.trunk.hidden, dz = config_.latent, E = config_.frag_embed,
                    Hd = config_.dec_hidden, A = config_.atom_embed, P = config_.pair_hidden,
                    V1 = vocab_.size() + 1;
  gnn::init_trunk(params_, "enc.", chem::node_feature_width(elements_), config_.trunk, rng);
  params_.add_glorot("enc.mu.w", H, dz, rng);
  params_.add_zeros("enc.mu.b", 1, dz);
  params_.add_glorot("enc.ls.w", H, dz, rng, 0.1);
  params_.add_zeros("enc.ls.b", 1, dz);

  params_.add_glorot("dec.embed", V1, E, rng);
  params_.add_glorot("dec.init.w", dz, Hd, rng);
  params_.add_zeros("dec.init.b", 1, Hd);
  for (const char* g : {"z", "r", "n"}) {
    params_.add_glorot(std::string("dec.gru.w") + g, E + dz, Hd, rng);
    params_.add_glorot(std::string("dec.gru.u") + g, Hd, Hd, rng);
    params_.add_zeros(std::string("dec.gru.b") + g, 1, Hd);
  }
  params_.add_glorot("dec.out.w", Hd, V1, rng);
  params_.add_zeros("dec.out.b", 1, V1);

  params_.add_glorot("edge.atom.wf", elements_.size() + 8, A, rng);
  params_.add_glorot("edge.atom.wc", Hd, A, rng);
  params_.add_glorot("edge.atom.wz", dz, A, rng);
  params_.add_zeros("edge.atom.b", 1, A);
  params_.add_glorot("edge.pair.ws", A, P, rng);
  params_.add_glorot("edge.pair.wp", A, P, rng);
  params_.add_zeros("edge.pair.b", 1, P);
  params_.add_glorot("edge.out.w", P, kEdgeClasses, rng);
  params_.add_zeros("edge.out.b", 1, kEdgeClasses);
}

nk::Var VaeModel::bind(nk::Tape& tape, const std::string& name, bool trainable) const {
  auto& p = params_.get(name);
  return trainable ? tape.param(p) : tape.frozen(p);
}

nk::Var VaeModel::encoder_graph(nk::Tape& tape, const gnn::BatchGraph& batch, bool trainable) const {
  nk::Var h = gnn::trunk_forward(tape, params_, "enc.", batch, config_.trunk, trainable);
  return nk::segment_max(h, batch.graph_of_node, batch.graphs);
}

nk::Var VaeModel::gru_step(nk::Tape& tape, nk::Var h, const std::vector<int>& inputs, nk::Var z,
                           bool trainable) const {
  auto P = [&](const std::string& n) { return bind(tape, n, trainable); };
  nk::Var x = nk::concat_cols(nk::gather_rows(P("dec.embed"), inputs), z);
  auto gate = [&](const char* g, nk::Var hh) {
    return nk::add_row(nk::add(nk::matmul(x, P(std::string("dec.gru.w") + g)),
                               nk::matmul(hh, P(std::string("dec.gru.u") + g))),
                       P(std::string("dec.gru.b") + g));
  };
  nk::Var zg = nk::sigmoid(gate("z", h));
  nk::Var r = nk::sigmoid(gate("r", h));
  nk::Var n = nk::tanh(gate("n", nk::mul(r, h)));
  return nk::add(n, nk::mul(zg, nk::sub(h, n)));
}

nk::Var VaeModel::token_logits(nk::Tape& tape, nk::Var h, bool trainable) const {
  return nk::add_row(nk::matmul(h, bind(tape, "dec.out.w", trainable)), bind(tape, "dec.out.b", trainable));
}

nk::Tensor VaeModel::atom_features(const std::vector<int>& atom_vocab,
                                   const std::vector<int>& atom_in_frag) const {
  const std::size_t ne = elements_.size();
  nk::Tensor f = nk::Tensor::matrix(atom_vocab.size(), ne + 8);
  for (std::size_t r = 0; r < atom_vocab.size(); ++r) {
    const auto& pat = vocab_[atom_vocab[r]].pattern;
    const int a = atom_in_frag[r];
    const auto& atom = pat.atom(a);
    const int ei = elements_.index_of(atom.element);
    if (ei < 0) throw VaeError("fragment element " + std::string(chem::element_symbol(atom.element)) +
                               " is outside the configured element set");
    f.at(r, static_cast<std::size_t>(ei)) = 1.0;
    f.at(r, ne + static_cast<std::size_t>(std::clamp(atom.charge, -1, 1) + 1)) = 1.0;
    f.at(r, ne + 3) = pat.degree(a) / 4.0;
    const int free = std::max(0, chem::max_valence(atom.element, atom.charge) - pat.bond_order_sum(a));
    f.at(r, ne + 4 + static_cast<std::size_t>(std::min(free, 3))) = 1.0;
  }
  return f;
}

nk::Var VaeModel::edge_logits(nk::Tape& tape, const nk::Tensor& features, nk::Var context, nk::Var z_rows,
                              const std::vector<int>& left, const std::vector<int>& right,
                              bool trainable) const {
  auto P = [&](const std::string& n) { return bind(tape, n, trainable); };
  nk::Var a = nk::tanh(nk::add_row(
      nk::add(nk::add(nk::matmul(tape.constant(features), P("edge.atom.wf")), nk::matmul(context, P("edge.atom.wc"))),
              nk::matmul(z_rows, P("edge.atom.wz"))),
      P("edge.atom.b")));
  nk::Var u = nk::gather_rows(a, left);
  nk::Var w = nk::gather_rows(a, right);
  nk::Var s = nk::tanh(nk::add_row(
      nk::add(nk::matmul(nk::add(u, w), P("edge.pair.ws")), nk::matmul(nk::mul(u, w), P("edge.pair.wp"))),
      P("edge.pair.b")));
  return nk::add_row(nk::matmul(s, P("edge.out.w")), P("edge.out.b"));
}

ElboParts VaeModel::elbo(nk::Tape& tape, const std::vector<const Example*>& batch, const nk::Tensor& eps,
                         bool trainable, double kl_weight) const {
  if (batch.empty()) throw VaeError("elbo on an empty batch");
  const std::size_t B = batch.size(), dz = config_.latent;
  if (eps.rows() != B || eps.cols() != dz) throw VaeError("eps must be [batch, latent]");
  std::vector<const chem::Molecule*> mols;
  for (const auto* ex : batch) {
    if (ex->tokens.empty()) throw VaeError("example without fragments");
    if (static_cast<int>(ex->tokens.size()) > config_.n_max)
      throw VaeError("molecule has " + std::to_string(ex->tokens.size()) + " fragments, above n_max");
    mols.push_back(&ex->mol);
  }
  auto P = [&](const std::string& n) { return bind(tape, n, trainable); };
  const auto gb = gnn::make_batch(mols, elements_);
  nk::Var hg = encoder_graph(tape, gb, trainable);
  nk::Var mu = nk::add_row(nk::matmul(hg, P("enc.mu.w")), P("enc.mu.b"));
  nk::Var ls = nk::add_row(nk::matmul(hg, P("enc.ls.w")), P("enc.ls.b"));
  nk::Var z = nk::add(mu, nk::mul(nk::exp(ls), tape.constant(eps)));
  nk::Var kl = nk::scale(
      nk::sum(nk::sub(nk::add(nk::square(mu), nk::exp(nk::scale(ls, 2.0))), nk::add_scalar(nk::scale(ls, 2.0), 1.0))),
      0.5);

  ElboParts out;
  const std::size_t V = vocab_.size();
  std::size_t lmax = 0;
  for (const auto* ex : batch) lmax = std::max(lmax, ex->tokens.size());

  nk::Var h = nk::tanh(nk::add_row(nk::matmul(z, P("dec.init.w")), P("dec.init.b")));
  nk::Var logp_total;
  bool have_total = false;
  auto accumulate = [&](nk::Var term) {
    logp_total = have_total ? nk::add(logp_total, term) : term;
    have_total = true;
  };
  nk::Var states;
  for (std::size_t t = 0; t <= lmax; ++t) {
    std::vector<int> inputs(B), targets(B, 0);
    nk::Tensor mask = nk::Tensor::matrix(B, 1);
    bool any = false;
    for (std::size_t b = 0; b < B; ++b) {
      const auto& tok = batch[b]->tokens;
      inputs[b] = (t == 0 || t - 1 >= tok.size()) ? static_cast<int>(V) : tok[t - 1];
      if (t < tok.size()) {
        targets[b] = tok[t];
        mask.at(b, 0) = 1.0;
      } else if (t == tok.size() && static_cast<int>(tok.size()) < config_.n_max) {
        targets[b] = static_cast<int>(V);
        mask.at(b, 0) = 1.0;
      }
      any = any || mask.at(b, 0) != 0.0;
    }
    h = gru_step(tape, h, inputs, z, trainable);
    if (t >= 1) states = (t == 1) ? h : nk::concat_rows(states, h);
    if (!any) continue;
    nk::Var logits = token_logits(tape, h, trainable);
    if (t == 0) {
      nk::Tensor stop = nk::Tensor::matrix(B, V + 1);
      for (std::size_t b = 0; b < B; ++b) stop.at(b, V) = kMasked;
      logits = nk::add(logits, tape.constant(stop));
    }
    nk::Var lp = nk::log_softmax_rows(logits);
    accumulate(nk::sum(nk::mul_col(nk::pick(lp, targets), tape.constant(mask))));
    const auto& lv = lp.value();
    for (std::size_t b = 0; b < B; ++b) {
      if (mask.at(b, 0) == 0.0) continue;
      std::size_t arg = 0;
      for (std::size_t k = 1; k <= V; ++k)
        if (lv.at(b, k) > lv.at(b, arg)) arg = k;
      ++out.tokens;
      out.correct_tokens += static_cast<int>(arg) == targets[b] ? 1 : 0;
    }
  }

  std::vector<int> av, ai, ctx_rows, z_rows, left, right, classes;
  for (std::size_t b = 0; b < B; ++b) {
    const auto* ex = batch[b];
    const int off = static_cast<int>(av.size());
    for (std::size_t r = 0; r < ex->atom_vocab.size(); ++r) {
      av.push_back(ex->atom_vocab[r]);
      ai.push_back(ex->atom_in_frag[r]);
      ctx_rows.push_back(ex->atom_frag[r] * static_cast<int>(B) + static_cast<int>(b));
      z_rows.push_back(static_cast<int>(b));
    }
    for (std::size_t p = 0; p < ex->pairs.size(); ++p) {
      left.push_back(off + ex->pairs[p].first);
      right.push_back(off + ex->pairs[p].second);
      classes.push_back(ex->pair_class[p]);
    }
  }
  if (!left.empty()) {
    nk::Var el = edge_logits(tape, atom_features(av, ai), nk::gather_rows(states, ctx_rows),
                             nk::gather_rows(z, z_rows), left, right, trainable);
    accumulate(nk::sum(nk::pick(nk::log_softmax_rows(el), classes)));
  }

  const double inv_b = 1.0 / static_cast<double>(B);
  out.recon = -logp_total.item() * inv_b;
  out.kl = kl.item() * inv_b;
  out.loss = nk::scale(nk::add(nk::neg(logp_total), nk::scale(kl, kl_weight)), inv_b);
  return out;
}

double VaeModel::log_likelihood(const std::vector<double>& z, const std::vector<int>& tokens,
                                const std::vector<int>& pair_class) const {
  if (z.size() != config_.latent) throw VaeError("latent dimension mismatch");
  if (tokens.empty() || static_cast<int>(tokens.size()) > config_.n_max)
    throw VaeError("token sequence length must be in 1..n_max");
  const Layout l = layout_for(tokens, vocab_);
  if (pair_class.size() != l.pairs.size()) throw VaeError("pair class count does not match the layout");
  nk::Tape tape(false);
  const std::size_t V = vocab_.size();
  nk::Var zr = tape.constant(nk::Tensor::row(z));
  nk::Var h = nk::tanh(nk::add_row(nk::matmul(zr, tape.frozen(params_.get("dec.init.w"))),
                                   tape.frozen(params_.get("dec.init.b"))));
  double total = 0.0;
  std::vector<std::vector<double>> ctx;
  for (std::size_t t = 0; t <= tokens.size(); ++t) {
    const int input = t == 0 ? static_cast<int>(V) : tokens[t - 1];
    h = gru_step(tape, h, {input}, zr, false);
    if (t >= 1) ctx.push_back(h.value().vec());
    int target = -1;
    if (t < tokens.size()) target = tokens[t];
    else if (static_cast<int>(tokens.size()) < config_.n_max) target = static_cast<int>(V);
    if (target < 0) continue;
    auto logits = token_logits(tape, h, false).value().vec();
    if (t == 0) logits[V] += kMasked;
    total += log_softmax(logits)[static_cast<std::size_t>(target)];
  }
  if (!l.pairs.empty()) {
    std::vector<int> left, right, ctx_rows;
    for (auto [i, j] : l.pairs) {
      left.push_back(i);
      right.push_back(j);
    }
    for (int f : l.atom_frag) ctx_rows.push_back(f);
    nk::Var c = nk::gather_rows(tape.constant(stack_rows(ctx, config_.dec_hidden)), ctx_rows);
    nk::Var el = edge_logits(tape, atom_features(l.atom_vocab, l.atom_in_frag), c,
                             nk::repeat_rows(zr, l.atom_vocab.size()), left, right, false);
    for (std::size_t p = 0; p < l.pairs.size(); ++p) {
      if (pair_class[p] < 0 || pair_class[p] >= kEdgeClasses) throw VaeError("edge class out of range");
      total += log_softmax(row_of(el.value(), p))[static_cast<std::size_t>(pair_class[p])];
    }
  }
  return total;
}

Encoding VaeModel::encode(const chem::Molecule& mol) const {
  nk::Tape tape(false);
  const auto gb = gnn::make_batch({&mol}, elements_);
  nk::Var hg = encoder_graph(tape, gb, false);
  nk::Var mu = nk::add_row(nk::matmul(hg, tape.frozen(params_.get("enc.mu.w"))), tape.frozen(params_.get("enc.mu.b")));
  nk::Var ls = nk::add_row(nk::matmul(hg, tape.frozen(params_.get("enc.ls.w"))), tape.frozen(params_.get("enc.ls.b")));
  return {{mu.value().vec(), ls.value().vec()}, hg.value().vec()};
}

namespace {

struct Hyp {
  std::vector<int> tokens;
  double logp = 0.0;
  std::vector<double> h;
  std::vector<std::vector<double>> ctx;
  std::vector<std::vector<double>> step_logits;
  bool stopped = false;
};

}  // namespace

DecodeResult VaeModel::decode(const std::vector<double>& z, const DecodeOptions& options, nk::Rng& rng) const {
  if (z.size() != config_.latent) throw VaeError("latent dimension mismatch");
  if (options.beam < 1) throw VaeError("beam must be at least 1");
  if (options.mode == DecodeMode::Sample && !(options.temperature > 0.0))
    throw VaeError("sampling temperature must be positive");
  const std::size_t V = vocab_.size();
  const int stop = static_cast<int>(V);
  nk::Tape tape(false);
  nk::Var zr = tape.constant(nk::Tensor::row(z));

  Hyp start;
  start.h = nk::tanh(nk::add_row(nk::matmul(zr, tape.frozen(params_.get("dec.init.w"))),
                                 tape.frozen(params_.get("dec.init.b"))))
                .value()
                .vec();
  const std::size_t width = options.mode == DecodeMode::Beam ? 1 : static_cast<std::size_t>(options.beam);
  std::vector<Hyp> alive(width, start), finished;

  for (int t = 0; !alive.empty(); ++t) {
    std::vector<std::vector<double>> hrows;
    std::vector<int> inputs;
    for (const auto& hy : alive) {
      hrows.push_back(hy.h);
      inputs.push_back(t == 0 ? stop : hy.tokens.back());
    }
    const std::size_t R = alive.size();
    nk::Var hn = gru_step(tape, tape.constant(stack_rows(hrows, config_.dec_hidden)), inputs,
                          nk::repeat_rows(zr, R), false);
    for (std::size_t i = 0; i < R; ++i) {
      alive[i].h = row_of(hn.value(), i);
      if (t >= 1) alive[i].ctx.push_back(alive[i].h);
    }
    if (t == config_.n_max) {
      for (auto& hy : alive) finished.push_back(std::move(hy));
      break;
    }
    const nk::Tensor logits = token_logits(tape, hn, false).value();
    const bool forced = static_cast<std::size_t>(t) < options.forced.size();
    std::vector<std::vector<double>> raw(R), lp(R);
    for (std::size_t i = 0; i < R; ++i) {
      raw[i] = row_of(logits, i);
      auto masked = raw[i];
      if (t == 0) masked[V] += kMasked;
      lp[i] = log_softmax(masked);
    }
    auto extend = [&](std::size_t i, int k, std::vector<Hyp>& next) {
      Hyp hy = alive[i];
      hy.logp += lp[i][static_cast<std::size_t>(k)];
      hy.step_logits.push_back(raw[i]);
      if (k == stop) {
        hy.stopped = true;
        finished.push_back(std::move(hy));
      } else {
        hy.tokens.push_back(k);
        next.push_back(std::move(hy));
      }
    };
    std::vector<Hyp> next;
    if (options.mode == DecodeMode::Beam) {
      std::vector<std::tuple<double, std::size_t, int>> cands;
      for (std::size_t i = 0; i < R; ++i) {
        for (int k = 0; k <= stop; ++k) {
          if (forced && k != options.forced[static_cast<std::size_t>(t)]) continue;
          if (t == 0 && k == stop) continue;
          cands.emplace_back(alive[i].logp + lp[i][static_cast<std::size_t>(k)], i, k);
        }
      }
      std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
      });
      const std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(options.beam));
      for (std::size_t c = 0; c < keep; ++c) extend(std::get<1>(cands[c]), std::get<2>(cands[c]), next);
    } else {
      for (std::size_t i = 0; i < R; ++i) {
        int k;
        if (forced) {
          k = options.forced[static_cast<std::size_t>(t)];
        } else {
          std::vector<double> w(V + 1);
          double m = -1e300;
          for (std::size_t j = 0; j <= V; ++j) m = std::max(m, lp[i][j] / options.temperature);
          double s = 0.0;
          for (std::size_t j = 0; j <= V; ++j) s += w[j] = (t == 0 && j == V) ? 0.0 : std::exp(lp[i][j] / options.temperature - m);
          double u = rng.uniform() * s;
          k = static_cast<int>(V) - 1;
          for (std::size_t j = 0; j <= V; ++j) {
            if (u < w[j]) {
              k = static_cast<int>(j);
              break;
            }
            u -= w[j];
          }
        }
        if (t == 0 && k == stop) throw VaeError("STOP cannot be the first token");
        extend(i, k, next);
      }
    }
    alive = std::move(next);
  }

  std::stable_sort(finished.begin(), finished.end(), [](const Hyp& a, const Hyp& b) { return a.logp > b.logp; });
  if (finished.size() > static_cast<std::size_t>(options.beam)) finished.resize(static_cast<std::size_t>(options.beam));

  std::vector<DecodeResult> attempts;
  for (const auto& hy : finished) {
    const Layout l = layout_for(hy.tokens, vocab_);
    DecodeResult res;
    res.trace.tokens = hy.tokens;
    res.trace.stopped = hy.stopped;
    res.trace.step_logits = hy.step_logits;
    res.trace.pairs = l.pairs;
    double ll = hy.logp;

    chem::Molecule mol;
    for (std::size_t r = 0; r < l.atom_vocab.size(); ++r)
      mol.add_atom(vocab_[l.atom_vocab[r]].pattern.atom(l.atom_in_frag[r]));
    std::vector<int> first(hy.tokens.size(), 0);
    for (std::size_t r = l.atom_vocab.size(); r-- > 0;) first[l.atom_frag[r]] = static_cast<int>(r);
    for (std::size_t f = 0; f < hy.tokens.size(); ++f)
      for (const auto& b : vocab_[hy.tokens[f]].pattern.bonds()) mol.add_bond(first[f] + b.a, first[f] + b.b, b.order);

    const std::size_t np = l.pairs.size();
    std::vector<std::vector<double>> plp(np);
    res.trace.pair_class.assign(np, 0);
    if (np > 0) {
      std::vector<int> left, right;
      for (auto [i, j] : l.pairs) {
        left.push_back(i);
        right.push_back(j);
      }
      nk::Var c = nk::gather_rows(tape.constant(stack_rows(hy.ctx, config_.dec_hidden)), l.atom_frag);
      const nk::Tensor el = edge_logits(tape, atom_features(l.atom_vocab, l.atom_in_frag), c,
                                        nk::repeat_rows(zr, l.atom_vocab.size()), left, right, false)
                                .value();
      for (std::size_t p = 0; p < np; ++p) {
        res.trace.pair_logits.push_back(row_of(el, p));
        plp[p] = log_softmax(res.trace.pair_logits.back());
      }
    }
    std::vector<int> free(mol.atom_count());
    for (std::size_t a = 0; a < mol.atom_count(); ++a) {
      const auto& at = mol.atom(static_cast<int>(a));
      free[a] = chem::max_valence(at.element, at.charge) - mol.bond_order_sum(static_cast<int>(a));
    }
    UnionFind uf(mol.atom_count());
    for (const auto& b : mol.bonds()) uf.unite(b.a, b.b);
    auto admit = [&](std::size_t p, int order) {
      auto [i, j] = l.pairs[p];
      mol.add_bond(i, j, order);
      free[i] -= order;
      free[j] -= order;
      uf.unite(i, j);
      res.trace.pair_class[p] = order;
    };

    // Confident non-"none" predictions first, kept only when both atoms have
    // the free valence for them.
    std::vector<std::pair<double, std::size_t>> proposed;
    for (std::size_t p = 0; p < np; ++p) {
      int arg = 0;
      for (int k = 1; k < kEdgeClasses; ++k)
        if (plp[p][k] > plp[p][arg]) arg = k;
      if (arg != 0) proposed.emplace_back(plp[p][arg], p);
    }
    std::stable_sort(proposed.begin(), proposed.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (auto [score, p] : proposed) {
      int arg = 0;
      for (int k = 1; k < kEdgeClasses; ++k)
        if (plp[p][k] > plp[p][arg]) arg = k;
      auto [i, j] = l.pairs[p];
      if (free[i] >= arg && free[j] >= arg) admit(p, arg);
    }

    // Connectivity repair: maximum spanning selection over the best feasible
    // bond order of each remaining cross-component pair.
    auto best_order = [&](std::size_t p) {
      auto [i, j] = l.pairs[p];
      int best = 0;
      for (int k = 1; k < kEdgeClasses && k <= std::min(free[i], free[j]); ++k)
        if (best == 0 || plp[p][k] > plp[p][best]) best = k;
      return best;
    };
    std::vector<std::pair<double, std::size_t>> spanning;
    for (std::size_t p = 0; p < np; ++p) {
      if (res.trace.pair_class[p] != 0) continue;
      const int k = best_order(p);
      if (k > 0 && uf.find(l.pairs[p].first) != uf.find(l.pairs[p].second)) spanning.emplace_back(plp[p][k], p);
    }
    std::stable_sort(spanning.begin(), spanning.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (auto [score, p] : spanning) {
      auto [i, j] = l.pairs[p];
      if (uf.find(i) == uf.find(j)) continue;
      const int k = best_order(p);
      if (k > 0) admit(p, k);
    }

    for (std::size_t p = 0; p < np; ++p) ll += plp[p][static_cast<std::size_t>(res.trace.pair_class[p])];
    res.trace.log_likelihood = ll;
    const auto report = chem::check_validity(mol);
    res.ok = report.valid;
    if (!report.valid) res.failure = report.violations.front().rule + ": " + report.violations.front().detail;
    res.mol = std::move(mol);
    attempts.push_back(std::move(res));
  }
  std::stable_sort(attempts.begin(), attempts.end(), [](const DecodeResult& a, const DecodeResult& b) {
    return a.trace.log_likelihood > b.trace.log_likelihood;
  });
  for (auto& a : attempts)
    if (a.ok) return std::move(a);
  if (attempts.empty()) {
    DecodeResult none;
    none.failure = "no finished hypothesis";
    return none;
  }
  return std::move(attempts.front());
}

nk::NamedTensors VaeModel::export_tensors() const {
  nk::NamedTensors out = params_.export_tensors();
  const auto& c = config_;
  out.emplace_back("meta.vae", nk::Tensor::row({static_cast<double>(c.latent), static_cast<double>(c.trunk.hidden),
                                                static_cast<double>(c.trunk.layers),
                                                c.trunk.update == gnn::UpdateMode::Concat ? 0.0 : 1.0,
                                                static_cast<double>(c.frag_embed), static_cast<double>(c.dec_hidden),
                                                static_cast<double>(c.atom_embed), static_cast<double>(c.pair_hidden),
                                                static_cast<double>(c.n_max), static_cast<double>(vocab_.size())}));
  std::vector<double> elems;
  for (int e : elements_.elements()) elems.push_back(e);
  out.emplace_back("meta.elements", nk::Tensor::row(elems));
  return out;
}

void VaeModel::save(const std::filesystem::path& path) const { nk::save_checkpoint(path, export_tensors()); }

VaeModel VaeModel::load(const std::filesystem::path& path, fragvocab::FragmentVocab vocab) {
  const auto tensors = nk::load_checkpoint(path);
  const nk::Tensor* meta = nullptr;
  const nk::Tensor* els = nullptr;
  for (const auto& [name, t] : tensors) {
    if (name == "meta.vae") meta = &t;
    if (name == "meta.elements") els = &t;
  }
  if (!meta || !els || meta->size() != 10) throw nk::CheckpointError(path.string() + " is not a VAE checkpoint");
  const auto& m = *meta;
  if (static_cast<std::size_t>(m[9]) != vocab.size())
    throw nk::CheckpointError(path.string() + " was trained with a vocabulary of " +
                              std::to_string(static_cast<std::size_t>(m[9])) + " fragments, got " +
                              std::to_string(vocab.size()));
  VaeConfig c;
  c.latent = static_cast<std::size_t>(m[0]);
  c.trunk.hidden = static_cast<std::size_t>(m[1]);
  c.trunk.layers = static_cast<int>(m[2]);
  c.trunk.update = m[3] == 0.0 ? gnn::UpdateMode::Concat : gnn::UpdateMode::Additive;
  c.frag_embed = static_cast<std::size_t>(m[4]);
  c.dec_hidden = static_cast<std::size_t>(m[5]);
  c.atom_embed = static_cast<std::size_t>(m[6]);
  c.pair_hidden = static_cast<std::size_t>(m[7]);
  c.n_max = static_cast<int>(m[8]);
  std::vector<int> elems;
  for (double e : els->data()) elems.push_back(static_cast<int>(e));
  VaeModel model(std::move(vocab), chem::ElementSet(elems), c, 0);
  model.params_.import_tensors(tensors);
  return model;
}

double token_accuracy(const VaeModel& model, const std::vector<Example>& examples) {
  std::size_t tokens = 0, correct = 0;
  for (std::size_t s = 0; s < examples.size(); s += 64) {
    std::vector<const Example*> batch;
    for (std::size_t i = s; i < std::min(examples.size(), s + 64); ++i) batch.push_back(&examples[i]);
    nk::Tape tape(false);
    const auto parts =
        model.elbo(tape, batch, nk::Tensor::matrix(batch.size(), model.config().latent), false);
    tokens += parts.tokens;
    correct += parts.correct_tokens;
  }
  return tokens ? static_cast<double>(correct) / static_cast<double>(tokens) : 0.0;
}

VaeTrainResult train_vae(const std::vector<chem::Molecule>& corpus, const fragvocab::FragmentVocab& vocab,
                         const chem::ElementSet& elements, const VaeConfig& model_config,
                         const VaeTrainConfig& config, std::ostream* log) {
  if (corpus.empty()) throw VaeError("train_vae: empty corpus");
  std::vector<Example> examples;
  std::size_t skipped = 0;
  for (const auto& m : corpus) {
    auto ex = make_example(m, vocab);
    if (static_cast<int>(ex.tokens.size()) > model_config.n_max) {
      ++skipped;
      continue;
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw VaeError("train_vae: no molecule fits within n_max fragments");

  VaeModel model(vocab, elements, model_config, config.seed);
  nk::Adam opt(config.lr);
  auto shuffle_rng = nk::Rng::stream(config.seed, "vae.shuffle");
  auto eps_rng = nk::Rng::stream(config.seed, "vae.eps");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  VaeTrainResult result{model, {}, 0, skipped};
  double best = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    double loss_sum = 0.0, recon_sum = 0.0, kl_sum = 0.0;
    std::size_t tokens = 0, correct = 0;
    for (std::size_t s = 0; s < order.size(); s += config.batch_size) {
      std::vector<const Example*> batch;
      for (std::size_t k = s; k < std::min(order.size(), s + config.batch_size); ++k) batch.push_back(&examples[order[k]]);
      nk::Tensor eps = nk::Tensor::matrix(batch.size(), model_config.latent);
      for (auto& v : eps.vec()) v = eps_rng.normal();
      nk::Tape tape;
      auto parts = model.elbo(tape, batch, eps, true, config.kl_weight);
      tape.backward(parts.loss);
      nk::clip_grad_norm(model.params(), 5.0);
      opt.step(model.params());
      const double n = static_cast<double>(batch.size());
      loss_sum += parts.loss.item() * n;
      recon_sum += parts.recon * n;
      kl_sum += parts.kl * n;
      tokens += parts.tokens;
      correct += parts.correct_tokens;
    }
    const double n = static_cast<double>(examples.size());
    VaeEpochLog entry{epoch, loss_sum / n, recon_sum / n, kl_sum / n,
                      tokens ? static_cast<double>(correct) / static_cast<double>(tokens) : 0.0};
    result.curve.push_back(entry);
    if (log) {
      *log << nlohmann::json{{"epoch", entry.epoch}, {"loss", entry.loss}, {"recon", entry.recon},
                             {"kl", entry.kl}, {"token_acc", entry.token_acc}}
                  .dump()
           << '\n';
    }
    if (entry.loss < best) {
      best = entry.loss;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

}  // namespace cfx::genvae
