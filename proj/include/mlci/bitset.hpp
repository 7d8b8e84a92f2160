#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mlci {

using Word = std::uint64_t;

inline constexpr std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

inline bool test_bit(std::span<const Word> words, std::size_t i) {
  return (words[i / 64] >> (i % 64)) & 1U;
}

inline bool words_intersect(std::span<const Word> a, std::span<const Word> b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] & b[k]) return true;
  return false;
}

/// Dynamic bitset indexed by hypothesis number.
///
/// Storage is a packed array of 64-bit words so that transition tables can
/// keep one contiguous block per (state, action) and hand out spans.
class HypothesisBits {
 public:
  HypothesisBits() = default;
  explicit HypothesisBits(std::size_t size) : size_(size), words_(words_for(size), 0) {}
  HypothesisBits(std::size_t size, std::span<const Word> words);

  std::size_t size() const { return size_; }
  bool test(std::size_t i) const;
  void set(std::size_t i, bool value = true);
  void reset();
  std::size_t count() const;
  bool any() const;
  bool none() const { return !any(); }

  bool intersects(std::span<const Word> other) const { return words_intersect(words_, other); }
  bool intersects(const HypothesisBits& other) const { return intersects(other.words()); }

  HypothesisBits& operator|=(std::span<const Word> other);
  HypothesisBits& operator|=(const HypothesisBits& other) { return *this |= other.words(); }
  HypothesisBits& operator&=(const HypothesisBits& other);

  std::span<const Word> words() const { return words_; }
  std::span<Word> words() { return words_; }

  std::vector<std::size_t> indices() const;

  // One character per hypothesis, index 0 first.
  std::string to_string() const;
  static HypothesisBits from_string(std::string_view bits);

  bool operator==(const HypothesisBits&) const = default;

 private:
  std::size_t size_ = 0;
  std::vector<Word> words_;
};

}  // namespace mlci
