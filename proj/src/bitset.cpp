#include "mlci/bitset.hpp"

#include <bit>

#include "mlci/errors.hpp"

namespace mlci {

HypothesisBits::HypothesisBits(std::size_t size, std::span<const Word> words)
    : size_(size), words_(words.begin(), words.end()) {
  require(words.size() == words_for(size), "HypothesisBits: word count does not match size");
}

bool HypothesisBits::test(std::size_t i) const {
  require(i < size_, "HypothesisBits::test: index out of range");
  return test_bit(words_, i);
}

void HypothesisBits::set(std::size_t i, bool value) {
  require(i < size_, "HypothesisBits::set: index out of range");
  const Word mask = Word{1} << (i % 64);
  if (value)
    words_[i / 64] |= mask;
  else
    words_[i / 64] &= ~mask;
}

void HypothesisBits::reset() {
  for (auto& w : words_) w = 0;
}

std::size_t HypothesisBits::count() const {
  std::size_t n = 0;
  for (Word w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool HypothesisBits::any() const {
  for (Word w : words_)
    if (w) return true;
  return false;
}

HypothesisBits& HypothesisBits::operator|=(std::span<const Word> other) {
  require(other.size() == words_.size(), "HypothesisBits: size mismatch");
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= other[k];
  return *this;
}

HypothesisBits& HypothesisBits::operator&=(const HypothesisBits& other) {
  require(other.size_ == size_, "HypothesisBits: size mismatch");
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= other.words_[k];
  return *this;
}

std::vector<std::size_t> HypothesisBits::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size_; ++i)
    if (test_bit(words_, i)) out.push_back(i);
  return out;
}

std::string HypothesisBits::to_string() const {
  std::string s(size_, '0');
  for (std::size_t i = 0; i < size_; ++i)
    if (test_bit(words_, i)) s[i] = '1';
  return s;
}

HypothesisBits HypothesisBits::from_string(std::string_view bits) {
  HypothesisBits out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1')
      out.set(i);
    else if (bits[i] != '0')
      throw ContractViolation("HypothesisBits::from_string: expected only '0' and '1'");
  }
  return out;
}

}  // namespace mlci
