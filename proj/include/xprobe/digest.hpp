#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace xprobe {

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// First eight bytes of SHA-256(`run_seed` in decimal, NUL, `fact_id`), big-endian.
/// Gives every fact a sampling seed that does not depend on evaluation order.
std::uint64_t fact_seed(std::uint64_t run_seed, std::string_view fact_id);

}  // namespace xprobe
