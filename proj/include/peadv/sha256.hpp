#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "peadv/binio.hpp"

namespace peadv {

// Self-contained SHA-256 (FIPS 180-4). Used for corpus digests and
// seed derivation; keeping it in-tree avoids a crypto-library link for
// one function.
std::array<std::uint8_t, 32> sha256(ByteView data);

std::string sha256_hex(ByteView data);

std::string to_hex(ByteView data);

}  // namespace peadv
