#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace cogdist {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string to_hex(const Sha256& digest);
Sha256 from_hex(std::string_view hex);

/// Digest of a file's bytes; throws Error(Io) if unreadable.
std::string file_sha256_hex(const std::filesystem::path& path);

}  // namespace cogdist
