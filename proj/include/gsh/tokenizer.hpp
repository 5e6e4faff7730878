#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gsh/gs_array.hpp"
#include "gsh/transformer.hpp"

namespace gsh {

/// Packs a +-1 sequence into tokens of s bits: bit = (1 + a) / 2, the first
/// entry is the high-order bit, and the last token is zero-padded when s
/// does not divide the length.
class Tokenizer {
 public:
  static constexpr int kMaxStacking = 12;

  /// Throws std::invalid_argument unless 1 <= stacking <= 12 and bits > 0.
  Tokenizer(int stacking, int bits);

  int stacking() const { return s_; }
  int bits() const { return bits_; }
  int tokens() const { return (bits_ + s_ - 1) / s_; }
  int pad_bits() const { return tokens() * s_ - bits_; }
  int vocabulary() const { return 1 << s_; }
  int bos() const { return 1 << s_; }

  std::vector<int> encode(std::span<const std::int8_t> entries) const;
  /// Inverse of encode; padding bits are ignored. Throws on bad ids/length.
  std::vector<std::int8_t> decode(std::span<const int> tokens) const;

  /// Real (non-padding) bits carried by token t.
  int real_bits(int t) const;
  /// Ids that agree with `token` on its real bits, as a [lo, hi) target.
  TokenTarget target(int t, int token) const;

 private:
  int s_;
  int bits_;
};

/// begin token followed by the n/s tokens of the whole array.
std::vector<int> tokenize(const GsArray& a, int stacking);
/// Accepts the output of tokenize (leading begin token optional).
GsArray detokenize(std::span<const int> tokens, int n, int stacking);

}  // namespace gsh
