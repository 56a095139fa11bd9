#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace slateflow {

// Keys, values and slate bodies are opaque byte sequences. std::string is
// used as the byte container throughout; no text encoding is assumed.
using Bytes = std::string;

std::string base64_encode(std::string_view raw);

// Throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view encoded);

}  // namespace slateflow
