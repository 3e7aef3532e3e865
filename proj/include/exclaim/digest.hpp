#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace exclaim {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string to_hex(const std::uint8_t* data, std::size_t size);

std::string base64_encode(std::string_view data);
// Returns std::nullopt for malformed input.
std::optional<std::string> base64_decode(std::string_view text);

// Reads a whole file as bytes; returns false when the file cannot be opened.
bool read_file(const std::string& path, std::string& out);

}  // namespace exclaim
