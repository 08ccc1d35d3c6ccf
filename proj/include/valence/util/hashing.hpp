#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace valence {

/// 64-bit FNV-1a. Stable across platforms; used for feature hashing and seed
/// derivation, never for artifact integrity.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace valence
