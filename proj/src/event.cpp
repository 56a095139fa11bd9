#include "slateflow/event.hpp"

#include <array>

#include "slateflow/hash.hpp"

namespace slateflow {

std::strong_ordering compare_events(const Event& a, const Event& b) {
  if (auto c = a.ts <=> b.ts; c != 0) return c;
  if (auto c = a.sid.compare(b.sid); c != 0)
    return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
  if (auto c = a.key.compare(b.key); c != 0)
    return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
  if (auto c = a.producer.compare(b.producer); c != 0)
    return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

namespace {

std::uint64_t identity_hash(const Event& e) {
  std::uint64_t h = fnv1a64(e.sid);
  std::array<char, 16> nums{};
  for (int i = 0; i < 8; ++i) {
    nums[i] = static_cast<char>((e.ts.millis >> (8 * i)) & 0xff);
    nums[8 + i] = static_cast<char>((e.ts.seq >> (8 * i)) & 0xff);
  }
  h = fnv1a64(std::string_view(nums.data(), nums.size()), h);
  h = fnv1a64(e.key, h);
  return fnv1a64(e.producer, h);
}

std::string hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace

Event stamp_output(const Event& input, const std::string& emitter,
                   std::string stream, Bytes key, Bytes value,
                   std::size_t position) {
  Event out;
  out.sid = std::move(stream);
  out.ts = Timestamp{input.ts.millis, input.ts.seq + position + 1};
  out.key = std::move(key);
  out.value = std::move(value);
  out.producer = emitter + "#" + hex16(identity_hash(input));
  return out;
}

}  // namespace slateflow
