#pragma once

#include <cstdint>
#include <stdexcept>

#include "slateflow/bytes.hpp"

namespace slateflow {

// Codec ids recorded in store files, one byte per record.
inline constexpr std::uint8_t kCodecRaw = 0x00;
inline constexpr std::uint8_t kCodecDeflate = 0x01;
inline constexpr std::uint8_t kCodecTombstone = 0xff;

class CorruptSlateError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Deterministic zlib (deflate) compression at a fixed level; the same input
/// always yields the same bytes.
Bytes compress_slate(const Bytes& body);

/// Inverse of compress_slate. Throws CorruptSlateError on damaged input.
Bytes decompress_slate(const Bytes& compressed);

}  // namespace slateflow
