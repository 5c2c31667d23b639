#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pgd {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

/// FNV-1a over bytes. Stable across platforms; used for cache keys,
/// deterministic mock output, and seed derivation.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= static_cast<std::uint64_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

std::string hex64(std::uint64_t value);

/// Mixes a base seed with a tag and counter so sub-streams never collide.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t n = 0);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Canonical label form used everywhere labels are compared: trim then lowercase.
std::string fold_label(std::string_view s);

std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace pgd
