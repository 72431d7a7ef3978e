#include <algorithm>
#include <set>

#include "cfx/chem/random_molecule.hpp"
#include "cfx/chem/smiles.hpp"
#include "cfx/chem/validity.hpp"
#include "cfx/fp/fingerprint.hpp"
#include "doctest.h"

using namespace cfx;

namespace {

// Independent re-derivation of the circular fingerprint as a set of bit
// positions: byte-level FNV-1a over 8-byte little-endian integers.
std::uint64_t oracle_fnv(const std::vector<long long>& xs) {
  std::uint64_t h = 14695981039346656037ULL;
  for (long long x : xs) {
    unsigned long long u = static_cast<unsigned long long>(x);
    for (int i = 0; i < 8; ++i) {
      h = (h ^ ((u >> (8 * i)) & 255ULL)) * 1099511628211ULL;
    }
  }
  return h;
}

std::set<std::size_t> oracle_bits(const chem::Molecule& m, int radius, std::size_t nbits) {
  std::set<std::size_t> bits;
  const int n = static_cast<int>(m.atom_count());
  std::vector<std::uint64_t> inv(n);
  for (int v = 0; v < n; ++v) {
    int total = 0;
    for (const auto& nb : m.neighbors(v)) total += nb.order;
    inv[v] = oracle_fnv({m.atom(v).element, m.atom(v).charge, m.degree(v), total,
                         chem::implicit_hydrogens(m, v)});
    bits.insert(inv[v] % nbits);
  }
  for (int r = 0; r < radius; ++r) {
    std::vector<std::uint64_t> next(n);
    for (int v = 0; v < n; ++v) {
      std::vector<std::pair<long long, std::uint64_t>> env;
      for (const auto& nb : m.neighbors(v)) env.emplace_back(nb.order, inv[nb.atom]);
      std::sort(env.begin(), env.end());
      std::vector<long long> seq{static_cast<long long>(inv[v])};
      for (auto& [o, h] : env) {
        seq.push_back(o);
        seq.push_back(static_cast<long long>(h));
      }
      next[v] = oracle_fnv(seq);
      bits.insert(next[v] % nbits);
    }
    inv = next;
  }
  return bits;
}

double oracle_tanimoto(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  std::vector<std::size_t> i, u;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(i));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return u.empty() ? 1.0 : static_cast<double>(i.size()) / static_cast<double>(u.size());
}

}  // namespace

TEST_CASE("identical molecules give identical fingerprints") {
  auto a = fp::morgan_fingerprint(chem::parse_smiles("CC(=O)NC"));
  auto b = fp::morgan_fingerprint(chem::parse_smiles("CC(=O)NC"));
  CHECK(a == b);
  CHECK(a.popcount() >= 1);
}

TEST_CASE("radius 0 fingerprints of C and O are distinct single bits") {
  auto c = fp::morgan_fingerprint(chem::parse_smiles("C"), 0, 2048);
  auto o = fp::morgan_fingerprint(chem::parse_smiles("O"), 0, 2048);
  CHECK(c.popcount() == 1);
  CHECK(o.popcount() == 1);
  CHECK(c.test(oracle_fnv({6, 0, 0, 0, 4}) % 2048));
  CHECK(o.test(oracle_fnv({8, 0, 0, 0, 2}) % 2048));
  CHECK(c != o);
}

TEST_CASE("fingerprint matches the independent enumeration") {
  nk::Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    auto m = chem::random_molecule(rng);
    auto f = fp::morgan_fingerprint(m, 2, 1024);
    const auto bits = oracle_bits(m, 2, 1024);
    CHECK(f.popcount() == bits.size());
    for (auto b : bits) CHECK(f.test(b));
  }
}

TEST_CASE("fingerprint is invariant under atom permutation") {
  nk::Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    auto m = chem::random_molecule(rng);
    auto f = fp::morgan_fingerprint(m);
    for (int p = 0; p < 5; ++p) {
      CHECK(fp::morgan_fingerprint(m.permuted(chem::random_permutation(rng, m.atom_count()))) == f);
    }
  }
}

TEST_CASE("tanimoto edge cases") {
  fp::Fingerprint a(64), b(64), c(64);
  a.set(1);
  a.set(2);
  a.set(3);
  b.set(1);
  b.set(2);
  b.set(4);
  c.set(10);
  CHECK(fp::tanimoto(a, a) == 1.0);
  CHECK(fp::tanimoto(a, c) == 0.0);
  CHECK(fp::tanimoto(a, b) == 0.5);
  CHECK(fp::tanimoto(fp::Fingerprint(64), fp::Fingerprint(64)) == 1.0);
  CHECK_THROWS_AS(fp::tanimoto(a, fp::Fingerprint(128)), fp::FingerprintError);
  CHECK_THROWS_AS(fp::morgan_fingerprint(chem::parse_smiles("C"), 2, 1000), fp::FingerprintError);
}

TEST_CASE("distance properties") {
  auto g = chem::parse_smiles("CCO");
  auto h = chem::parse_smiles("CCN");
  CHECK(fp::distance(g, g) == 0.0);
  CHECK(fp::distance(g, h) == fp::distance(h, g));
  const double expected = 1.0 - oracle_tanimoto(oracle_bits(g, 2, 2048), oracle_bits(h, 2, 2048));
  CHECK(fp::distance(g, h) == expected);
  nk::Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    auto a = chem::random_molecule(rng);
    auto b = chem::random_molecule(rng);
    const double d = fp::distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
}

TEST_CASE("hex export round trip") {
  auto f = fp::morgan_fingerprint(chem::parse_smiles("C1CCNCC1"), 2, 256);
  const auto hex = f.to_hex();
  CHECK(hex.size() == 64);
  CHECK(fp::Fingerprint::from_hex(hex, 256) == f);
}
