#include "slateflow/bytes.hpp"

#include <array>
#include <stdexcept>

namespace slateflow {

namespace {

constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::array<int, 256> decode_table() {
  std::array<int, 256> t{};
  t.fill(-1);
  for (int i = 0; i < 64; ++i) t[static_cast<unsigned char>(kAlphabet[i])] = i;
  return t;
}

}  // namespace

std::string base64_encode(std::string_view raw) {
  std::string out;
  out.reserve((raw.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= raw.size()) {
    std::uint32_t n = (static_cast<unsigned char>(raw[i]) << 16) |
                      (static_cast<unsigned char>(raw[i + 1]) << 8) |
                      static_cast<unsigned char>(raw[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
    i += 3;
  }
  std::size_t rest = raw.size() - i;
  if (rest == 1) {
    std::uint32_t n = static_cast<unsigned char>(raw[i]) << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    std::uint32_t n = (static_cast<unsigned char>(raw[i]) << 16) |
                      (static_cast<unsigned char>(raw[i + 1]) << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view encoded) {
  static const std::array<int, 256> table = decode_table();
  if (encoded.size() % 4 != 0)
    throw std::invalid_argument("base64: length not a multiple of 4");
  std::string out;
  out.reserve(encoded.size() / 4 * 3);
  for (std::size_t i = 0; i < encoded.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      char c = encoded[i + j];
      if (c == '=') {
        if (i + 4 != encoded.size() || j < 2)
          throw std::invalid_argument("base64: misplaced padding");
        vals[j] = 0;
        ++pad;
      } else {
        int v = table[static_cast<unsigned char>(c)];
        if (v < 0) throw std::invalid_argument("base64: invalid character");
        if (pad > 0) throw std::invalid_argument("base64: data after padding");
        vals[j] = v;
      }
    }
    std::uint32_t n = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    out += static_cast<char>((n >> 16) & 0xff);
    if (pad < 2) out += static_cast<char>((n >> 8) & 0xff);
    if (pad < 1) out += static_cast<char>(n & 0xff);
  }
  return out;
}

}  // namespace slateflow
