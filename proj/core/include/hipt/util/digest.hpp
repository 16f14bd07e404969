#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace hipt {

// 64-bit FNV-1a. Used for state digests and file checksums.
class Fnv1a {
 public:
  void update(std::span<const std::uint8_t> bytes);
  void update(std::string_view text);
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes);
std::uint64_t fnv1a(std::string_view text);
std::string to_hex(std::uint64_t value);

}  // namespace hipt
