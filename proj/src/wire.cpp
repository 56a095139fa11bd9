#include "slateflow/wire.hpp"

namespace slateflow {
namespace wire {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out += static_cast<char>((v >> 8) & 0xff);
  out += static_cast<char>(v & 0xff);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_str16(std::string& out, const std::string& s) {
  if (s.size() > 0xffff) throw WireError("field exceeds u16 length");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out += s;
}

void put_str32(std::string& out, const std::string& s) {
  if (s.size() > 0xffffffffULL) throw WireError("field exceeds u32 length");
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

std::string finish(MsgType type, const std::string& payload) {
  std::string frame;
  frame.reserve(5 + payload.size());
  put_u32(frame, static_cast<std::uint32_t>(1 + payload.size()));
  frame += static_cast<char>(type);
  frame += payload;
  return frame;
}

class Reader {
 public:
  Reader(const std::string& frame, MsgType expected) {
    if (frame.size() < 5) throw WireError("short frame");
    p_ = frame.data();
    end_ = frame.data() + frame.size();
    std::uint32_t len = u32();
    if (len != frame.size() - 4) throw WireError("frame length mismatch");
    auto type = static_cast<MsgType>(static_cast<unsigned char>(*p_++));
    if (type != expected) throw WireError("unexpected frame type");
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<unsigned char>(*p_++);
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = (static_cast<std::uint16_t>(static_cast<unsigned char>(p_[0])) << 8) |
                      static_cast<unsigned char>(p_[1]);
    p_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(p_[i]);
    p_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<unsigned char>(p_[i]);
    p_ += 8;
    return v;
  }
  std::string str16() { return bytes(u16()); }
  std::string str32() { return bytes(u32()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  void done() const {
    if (p_ != end_) throw WireError("trailing bytes in frame");
  }

 private:
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n) throw WireError("truncated frame");
  }
  const char* p_;
  const char* end_;
};

}  // namespace

std::string encode_event(const EventFrame& f) {
  std::string p;
  put_str16(p, f.event.sid);
  put_u64(p, f.event.ts.millis);
  put_u64(p, f.event.ts.seq);
  put_str16(p, f.event.producer);
  put_str16(p, f.event.key);
  put_str16(p, f.dest_function);
  put_str32(p, f.event.value);
  return finish(MsgType::Event, p);
}

std::string encode_membership(const MembershipFrame& f) {
  std::string p;
  put_u64(p, f.epoch);
  if (f.live_addresses.size() > 0xffff) throw WireError("too many nodes");
  put_u16(p, static_cast<std::uint16_t>(f.live_addresses.size()));
  for (const auto& a : f.live_addresses) put_str16(p, a);
  return finish(MsgType::Membership, p);
}

std::string encode_failure_report(const FailureReportFrame& f) {
  std::string p;
  put_u64(p, f.observed_epoch);
  put_str16(p, f.dead_address);
  return finish(MsgType::FailureReport, p);
}

std::string encode_slate_fetch(const SlateFetchFrame& f) {
  std::string p;
  put_str16(p, f.updater);
  put_str16(p, f.key);
  return finish(MsgType::SlateFetchFwd, p);
}

std::string encode_slate_fetch_reply(const SlateFetchReply& f) {
  std::string p;
  p += static_cast<char>(f.status);
  put_str32(p, f.body);
  return finish(MsgType::SlateFetchFwd, p);
}

std::string encode_throttle(const ThrottleFrame& f) {
  std::string p;
  p += static_cast<char>(f.pause ? 1 : 0);
  put_str16(p, f.stream);
  return finish(MsgType::Throttle, p);
}

MsgType frame_type(const std::string& frame) {
  if (frame.size() < 5) throw WireError("short frame");
  return static_cast<MsgType>(static_cast<unsigned char>(frame[4]));
}

EventFrame decode_event(const std::string& frame) {
  Reader r(frame, MsgType::Event);
  EventFrame f;
  f.event.sid = r.str16();
  f.event.ts.millis = r.u64();
  f.event.ts.seq = r.u64();
  f.event.producer = r.str16();
  f.event.key = r.str16();
  f.dest_function = r.str16();
  f.event.value = r.str32();
  r.done();
  return f;
}

MembershipFrame decode_membership(const std::string& frame) {
  Reader r(frame, MsgType::Membership);
  MembershipFrame f;
  f.epoch = r.u64();
  std::uint16_t n = r.u16();
  f.live_addresses.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) f.live_addresses.push_back(r.str16());
  r.done();
  return f;
}

FailureReportFrame decode_failure_report(const std::string& frame) {
  Reader r(frame, MsgType::FailureReport);
  FailureReportFrame f;
  f.observed_epoch = r.u64();
  f.dead_address = r.str16();
  r.done();
  return f;
}

SlateFetchFrame decode_slate_fetch(const std::string& frame) {
  Reader r(frame, MsgType::SlateFetchFwd);
  SlateFetchFrame f;
  f.updater = r.str16();
  f.key = r.str16();
  r.done();
  return f;
}

SlateFetchReply decode_slate_fetch_reply(const std::string& frame) {
  Reader r(frame, MsgType::SlateFetchFwd);
  SlateFetchReply f;
  f.status = static_cast<SlateFetchReply::Status>(r.u8());
  f.body = r.str32();
  r.done();
  return f;
}

ThrottleFrame decode_throttle(const std::string& frame) {
  Reader r(frame, MsgType::Throttle);
  ThrottleFrame f;
  f.pause = r.u8() != 0;
  f.stream = r.str16();
  r.done();
  return f;
}

}  // namespace wire
}  // namespace slateflow
