#pragma once

// Ordinal states as root-to-leaf paths of a complete binary search tree.
//
// A variable with K states is laid out on a tree of depth n = ceil(log2 K).
// State y (0-based) is reached by the comparisons given by the binary digits
// of y, most significant first. When K is not a power of two the 2^n - K
// rightmost leaves are padding and get their mass removed after inference.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bsord/errors.hpp"

namespace bsord {

/// Largest supported tree depth. Inference enumerates 2^n leaves.
inline constexpr int kMaxTreeDepth = 16;

/// Decision path of one state, most significant bit first.
class BitCode {
 public:
  BitCode() = default;

  explicit BitCode(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    if (bits_.empty()) throw InvalidStateError("bit code must hold at least one bit");
    if (bits_.size() > 63) throw InvalidStateError("bit code longer than 63 bits");
    for (auto b : bits_) {
      if (b > 1) throw InvalidStateError("bit code entries must be 0 or 1");
    }
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  auto begin() const noexcept { return bits_.begin(); }
  auto end() const noexcept { return bits_.end(); }

  friend bool operator==(const BitCode&, const BitCode&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Smallest n with 2^n >= k_states.
inline int tree_depth(std::int64_t k_states) {
  if (k_states < 2) {
    throw InvalidStateError("an ordinal variable needs at least 2 states, got " +
                            std::to_string(k_states));
  }
  int n = 0;
  while ((std::int64_t{1} << n) < k_states) ++n;
  return n;
}

inline BitCode encode_state(std::int64_t y, int n_bits) {
  if (n_bits < 1 || n_bits > 62) {
    throw InvalidStateError("bit count must lie in [1, 62], got " + std::to_string(n_bits));
  }
  if (y < 0 || y >= (std::int64_t{1} << n_bits)) {
    throw InvalidStateError("state " + std::to_string(y) + " does not fit in " +
                            std::to_string(n_bits) + " bits");
  }
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n_bits));
  for (int i = 1; i <= n_bits; ++i) {
    bits[static_cast<std::size_t>(i - 1)] = static_cast<std::uint8_t>((y >> (n_bits - i)) & 1);
  }
  return BitCode(std::move(bits));
}

inline std::int64_t decode_bits(const BitCode& code) {
  if (code.empty()) throw InvalidStateError("cannot decode an empty bit code");
  std::int64_t y = 0;
  for (auto b : code) y = (y << 1) | b;
  return y;
}

struct Renormalized {
  std::vector<double> probs;
  /// Valid mass underflowed; probs is the uniform fallback.
  bool degenerate = false;
};

/// Drops the padding leaves (indices >= k_states) and rescales the rest.
inline Renormalized truncate_renormalize(std::span<const double> leaf_probs,
                                         std::int64_t k_states) {
  if (k_states < 1 || static_cast<std::size_t>(k_states) > leaf_probs.size()) {
    throw InvalidStateError("cannot keep " + std::to_string(k_states) + " states out of " +
                            std::to_string(leaf_probs.size()) + " leaves");
  }
  const auto k = static_cast<std::size_t>(k_states);
  const double mass = std::accumulate(leaf_probs.begin(), leaf_probs.begin() + k, 0.0);

  Renormalized out;
  if (!(mass >= 1e-300)) {
    out.probs.assign(k, 1.0 / static_cast<double>(k));
    out.degenerate = true;
    warn("leaf mass of the valid states underflowed; using the uniform distribution");
    return out;
  }
  out.probs.resize(k);
  for (std::size_t j = 0; j < k; ++j) out.probs[j] = leaf_probs[j] / mass;
  return out;
}

}  // namespace bsord
