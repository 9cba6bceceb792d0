#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

namespace kinoplan {

/// 64-bit FNV-1a, used for config digests, cache keys and stub seeding.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& text(std::string_view s) { return bytes(s.data(), s.size()); }
  Fnv1a& number(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);  // -0 and +0 hash alike
    return bytes(&bits, sizeof bits);
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) { return Fnv1a().text(s).value(); }

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace kinoplan
