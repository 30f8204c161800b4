#pragma once

#include <string>
#include <string_view>

namespace smartedge::detail {

std::string sha256_hex(std::string_view data);
std::string hmac_sha256_hex(std::string_view key, std::string_view data);

// Constant-time comparison of equal-length strings.
bool tags_equal(std::string_view a, std::string_view b) noexcept;

}  // namespace smartedge::detail
