#include "cfx/fp/fingerprint.hpp"

#include <algorithm>
#include <bit>

#include "cfx/chem/validity.hpp"

namespace cfx::fp {

Fingerprint::Fingerprint(std::size_t nbits) : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

void Fingerprint::set(std::size_t bit) { words_[bit / 64] |= (std::uint64_t{1} << (bit % 64)); }

bool Fingerprint::test(std::size_t bit) const { return (words_[bit / 64] >> (bit % 64)) & 1U; }

std::size_t Fingerprint::popcount() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::string Fingerprint::to_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(words_.size() * 16);
  for (auto w : words_)
    for (int shift = 60; shift >= 0; shift -= 4) out += digits[(w >> shift) & 0xF];
  return out;
}

Fingerprint Fingerprint::from_hex(const std::string& hex, std::size_t nbits) {
  Fingerprint fp(nbits);
  if (hex.size() != fp.words_.size() * 16) throw FingerprintError("hex length does not match width");
  for (std::size_t i = 0; i < fp.words_.size(); ++i) {
    std::uint64_t w = 0;
    for (std::size_t k = 0; k < 16; ++k) {
      const char c = hex[i * 16 + k];
      int d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else throw FingerprintError("invalid hex digit");
      w = (w << 4) | static_cast<std::uint64_t>(d);
    }
    fp.words_[i] = w;
  }
  return fp;
}

std::uint64_t hash_ints(const std::vector<std::int64_t>& values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::int64_t v : values) {
    auto u = static_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (u >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Fingerprint morgan_fingerprint(const chem::Molecule& mol, int radius, std::size_t nbits) {
  if (radius < 0) throw FingerprintError("radius must be non-negative");
  if (nbits == 0 || !std::has_single_bit(nbits)) throw FingerprintError("nbits must be a power of two");
  Fingerprint fp(nbits);
  const std::size_t n = mol.atom_count();
  std::vector<std::uint64_t> inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int v = static_cast<int>(i);
    const auto& a = mol.atom(v);
    inv[i] = hash_ints({a.element, a.charge, mol.degree(v), mol.bond_order_sum(v),
                        chem::implicit_hydrogens(mol, v)});
    fp.set(inv[i] % nbits);
  }
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<std::int64_t, std::int64_t>> env;
      for (const auto& nb : mol.neighbors(static_cast<int>(i))) {
        env.emplace_back(nb.order, static_cast<std::int64_t>(inv[static_cast<std::size_t>(nb.atom)]));
      }
      std::sort(env.begin(), env.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first < y.first;
        return static_cast<std::uint64_t>(x.second) < static_cast<std::uint64_t>(y.second);
      });
      std::vector<std::int64_t> seq{static_cast<std::int64_t>(inv[i])};
      for (const auto& [o, h] : env) {
        seq.push_back(o);
        seq.push_back(h);
      }
      next[i] = hash_ints(seq);
      fp.set(next[i] % nbits);
    }
    inv = std::move(next);
  }
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.nbits() != b.nbits()) {
    throw FingerprintError("fingerprint width mismatch: " + std::to_string(a.nbits()) + " vs " +
                           std::to_string(b.nbits()));
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.words().size(); ++i) {
    inter += static_cast<std::size_t>(std::popcount(a.words()[i] & b.words()[i]));
    uni += static_cast<std::size_t>(std::popcount(a.words()[i] | b.words()[i]));
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double distance(const chem::Molecule& a, const chem::Molecule& b, const FingerprintParams& params) {
  return tanimoto_distance(morgan_fingerprint(a, params), morgan_fingerprint(b, params));
}

}  // namespace cfx::fp
