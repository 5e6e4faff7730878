#include "gsh/tokenizer.hpp"

#include <stdexcept>
#include <string>

namespace gsh {

Tokenizer::Tokenizer(int stacking, int bits) : s_(stacking), bits_(bits) {
  if (stacking < 1 || stacking > kMaxStacking) {
    throw std::invalid_argument("stacking must be in [1, 12], got " + std::to_string(stacking));
  }
  if (bits <= 0) throw std::invalid_argument("tokenizer length must be positive");
}

std::vector<int> Tokenizer::encode(std::span<const std::int8_t> entries) const {
  if (static_cast<int>(entries.size()) != bits_) throw std::invalid_argument("tokenizer length mismatch");
  std::vector<int> out(static_cast<std::size_t>(tokens()), 0);
  for (int k = 0; k < tokens() * s_; ++k) {
    const int bit = k < bits_ && entries[static_cast<std::size_t>(k)] > 0 ? 1 : 0;
    auto& t = out[static_cast<std::size_t>(k / s_)];
    t = (t << 1) | bit;
  }
  return out;
}

std::vector<std::int8_t> Tokenizer::decode(std::span<const int> tokens_in) const {
  if (static_cast<int>(tokens_in.size()) != tokens()) throw std::invalid_argument("token count mismatch");
  std::vector<std::int8_t> out(static_cast<std::size_t>(bits_));
  for (int t = 0; t < tokens(); ++t) {
    const int id = tokens_in[static_cast<std::size_t>(t)];
    if (id < 0 || id >= vocabulary()) throw std::invalid_argument("token id out of range");
    for (int b = 0; b < s_; ++b) {
      const int k = t * s_ + b;
      if (k >= bits_) break;
      out[static_cast<std::size_t>(k)] = ((id >> (s_ - 1 - b)) & 1) != 0 ? 1 : -1;
    }
  }
  return out;
}

int Tokenizer::real_bits(int t) const { return t + 1 < tokens() ? s_ : s_ - pad_bits(); }

TokenTarget Tokenizer::target(int t, int token) const {
  const int pad = s_ - real_bits(t);
  const int lo = (token >> pad) << pad;
  return {lo, lo + (1 << pad)};
}

std::vector<int> tokenize(const GsArray& a, int stacking) {
  const Tokenizer tok(stacking, a.order());
  std::vector<int> out{tok.bos()};
  const auto body = tok.encode(a.entries());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

GsArray detokenize(std::span<const int> tokens, int n, int stacking) {
  check_order(n);
  const Tokenizer tok(stacking, n);
  if (!tokens.empty() && tokens.front() == tok.bos()) tokens = tokens.subspan(1);
  return GsArray(n, tok.decode(tokens));
}

}  // namespace gsh
