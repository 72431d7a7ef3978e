#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfx/chem/molecule.hpp"

namespace cfx::fp {

class FingerprintError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FingerprintParams {
  int radius = 2;
  std::size_t nbits = 2048;
  friend bool operator==(const FingerprintParams&, const FingerprintParams&) = default;
};

class Fingerprint {
 public:
  Fingerprint() = default;
  explicit Fingerprint(std::size_t nbits);

  std::size_t nbits() const { return nbits_; }
  void set(std::size_t bit);
  bool test(std::size_t bit) const;
  std::size_t popcount() const;
  const std::vector<std::uint64_t>& words() const { return words_; }

  // Lowercase hex, most significant nibble first within each 64-bit word,
  // words in ascending bit order.
  std::string to_hex() const;
  static Fingerprint from_hex(const std::string& hex, std::size_t nbits);

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

 private:
  std::size_t nbits_ = 0;
  std::vector<std::uint64_t> words_;
};

// 64-bit FNV-1a over a sequence of integers, each fed as 8 little-endian bytes.
std::uint64_t hash_ints(const std::vector<std::int64_t>& values);

// Circular fingerprint. Round 0 hashes (atomic number, charge, degree, total
// bond order, implicit H); round r hashes the previous invariant followed by
// the sorted (bond order, neighbor invariant) pairs. Every atom's invariant in
// every round sets bit (hash mod nbits).
Fingerprint morgan_fingerprint(const chem::Molecule& mol, int radius = 2,
                               std::size_t nbits = 2048);
inline Fingerprint morgan_fingerprint(const chem::Molecule& mol, const FingerprintParams& p) {
  return morgan_fingerprint(mol, p.radius, p.nbits);
}

// |a & b| / |a | b|; 1 when both are empty.
double tanimoto(const Fingerprint& a, const Fingerprint& b);
inline double tanimoto_distance(const Fingerprint& a, const Fingerprint& b) {
  return 1.0 - tanimoto(a, b);
}

double distance(const chem::Molecule& a, const chem::Molecule& b,
                const FingerprintParams& params = {});

}  // namespace cfx::fp
