#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmod/error.hpp"

namespace cmod {

inline int ceil_log2(uint64_t n) {
  int bits = 0;
  uint64_t c = 1;
  while (c < n) {
    c <<= 1;
    ++bits;
  }
  return bits;
}

// Big-endian bit stream backing the model coder.
class BitWriter {
 public:
  void put_bit(int b) {
    if ((nbits_ & 7) == 0) buf_.push_back(0);
    if (b) buf_.back() |= static_cast<uint8_t>(1u << (7 - (nbits_ & 7)));
    ++nbits_;
  }

  // MSB-first fixed-width field. width 0 writes nothing.
  void put_bits(uint64_t value, int width) {
    for (int i = width - 1; i >= 0; --i) put_bit(static_cast<int>((value >> i) & 1));
  }

  // Elias gamma code for v >= 1.
  void put_gamma(uint64_t v) {
    require_domain(v >= 1, "gamma code defined for positive integers");
    int n = 0;
    while ((v >> (n + 1)) != 0) ++n;
    for (int i = 0; i < n; ++i) put_bit(0);
    put_bits(v, n + 1);
  }

  // Count code for k >= 0.
  void put_count(uint64_t k) { put_gamma(k + 1); }

  uint64_t bit_length() const { return nbits_; }
  const std::vector<uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<uint8_t> buf_;
  uint64_t nbits_ = 0;
};

class BitReader {
 public:
  BitReader(const uint8_t* data, uint64_t nbits) : data_(data), nbits_(nbits) {}

  int get_bit() {
    if (pos_ >= nbits_) fail_parse("bitstream truncated");
    int b = (data_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1;
    ++pos_;
    return b;
  }

  uint64_t get_bits(int width) {
    uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 1) | static_cast<uint64_t>(get_bit());
    return v;
  }

  uint64_t get_gamma() {
    int n = 0;
    while (get_bit() == 0) {
      ++n;
      if (n > 62) fail_parse("gamma code overflow");
    }
    uint64_t v = 1;
    for (int i = 0; i < n; ++i) v = (v << 1) | static_cast<uint64_t>(get_bit());
    return v;
  }

  uint64_t get_count() { return get_gamma() - 1; }

  uint64_t position() const { return pos_; }
  uint64_t size() const { return nbits_; }

 private:
  const uint8_t* data_;
  uint64_t nbits_;
  uint64_t pos_ = 0;
};

// Fixed coding configuration. Integer counts use Elias gamma, generator and
// wire-type ids are uniform over the signature, parameters are sign-magnitude
// fixed point with q bits per entry: 1 sign, 3 integer, q-4 fractional bits
// (range roughly +-8). The same grid defines semantic fingerprints.
struct CodingScheme {
  int q = 16;
  bool presence_flags = true;
  int version = 1;

  int frac_bits() const { return q - 4; }

  int64_t magnitude_cap() const { return (int64_t{1} << (q - 1)) - 1; }

  int64_t quantize(double w) const {
    double scaled = std::ldexp(w, frac_bits());
    long long k = std::llround(scaled);
    int64_t cap = magnitude_cap();
    if (k > cap) k = cap;
    if (k < -cap) k = -cap;
    return k;
  }

  double dequantize(int64_t k) const { return std::ldexp(static_cast<double>(k), -frac_bits()); }

  void validate() const {
    require_domain(q >= 5 && q <= 60, "param resolution q must lie in [5, 60]");
    require_domain(version == 1, "unsupported coding scheme version");
  }
};

// Cost model for interpreting the distinct semantic elements of a model.
// LabelCode prices a fingerprint by its label's prefix-code length (kappa for
// unlabeled ones), ConstantPerElement charges kappa for every element, and
// UserTable reads per-label costs from an explicit table.
struct InterpretationCostOracle {
  enum class Mode { LabelCode, ConstantPerElement, UserTable };

  Mode mode = Mode::LabelCode;
  uint64_t kappa = 32;
  std::map<std::string, uint64_t> label_bits;

  uint64_t cost(const std::string* label) const {
    if (mode == Mode::ConstantPerElement) return kappa;
    if (label == nullptr) return kappa;
    auto it = label_bits.find(*label);
    if (it == label_bits.end()) fail_domain("oracle has no cost for label '" + *label + "'");
    return it->second;
  }
};

// Canonical prefix code over arbitrary-length codewords (glossed labels can
// exceed 64 bits). An optional sentinel word of length kappa marks unlabeled
// elements; it is part of the code exactly when Kraft still holds with it.
class PrefixCode {
 public:
  static constexpr const char* kUnlabeled = "";

  static PrefixCode build(const std::map<std::string, uint64_t>& lengths,
                          std::optional<uint64_t> unlabeled_len);

  bool has_unlabeled() const { return has_unlabeled_; }

  void write(BitWriter& w, const std::string& symbol) const;

  // Reads one codeword; returns kUnlabeled for the sentinel.
  std::string read(BitReader& r) const;

  uint64_t length_of(const std::string& symbol) const;

 private:
  struct TrieNode {
    int child[2] = {-1, -1};
    int symbol = -1;  // index into symbols_
  };

  std::vector<std::string> symbols_;
  std::vector<std::vector<bool>> words_;
  std::vector<TrieNode> trie_;
  bool has_unlabeled_ = false;

  void insert(int symbol_index);
};

}  // namespace cmod
