#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slateflow/event.hpp"
#include "slateflow/ring.hpp"

namespace slateflow {
namespace wire {

// Inter-node frame: [u32 frame len][u8 msg type][payload], all integers
// big-endian; frame len counts the type byte plus payload. The layouts below
// are normative for cross-node interop.
enum class MsgType : std::uint8_t {
  Event = 1,
  Membership = 2,
  FailureReport = 3,
  SlateFetchFwd = 4,
  Throttle = 5,
};

class WireError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EventFrame {
  Event event;
  std::string dest_function;
};

struct MembershipFrame {
  std::uint64_t epoch = 0;
  std::vector<std::string> live_addresses;
};

struct FailureReportFrame {
  std::uint64_t observed_epoch = 0;
  std::string dead_address;
};

struct SlateFetchFrame {
  std::string updater;
  Bytes key;
};

// Responses to SlateFetchFwd reuse the same frame type with this payload.
struct SlateFetchReply {
  enum class Status : std::uint8_t { Ok = 0, NotFound = 1, Error = 2 };
  Status status = Status::NotFound;
  Bytes body;
};

struct ThrottleFrame {
  bool pause = false;
  std::string stream;
};

// EVENT payload: [u16 sid len][sid][u64 millis][u64 seq][u16 producer len]
// [producer][u16 key len][key][u16 fn len][dest fn][u32 value len][value]
std::string encode_event(const EventFrame& f);
// MEMBERSHIP payload: [u64 epoch][u16 node count][(u16 len, addr)...]
std::string encode_membership(const MembershipFrame& f);
// FAILURE_REPORT payload: [u64 observed epoch][u16 len][dead addr]
std::string encode_failure_report(const FailureReportFrame& f);
// SLATE_FETCH_FWD request payload: [u16 updater len][updater][u16 key len][key]
std::string encode_slate_fetch(const SlateFetchFrame& f);
// SLATE_FETCH_FWD reply payload: [u8 status][u32 body len][body]
std::string encode_slate_fetch_reply(const SlateFetchReply& f);
// THROTTLE payload: [u8 action 1=pause 0=resume][u16 stream len][stream]
std::string encode_throttle(const ThrottleFrame& f);

MsgType frame_type(const std::string& frame);

// Decoders take a full frame (length prefix included) and throw WireError on
// malformed input.
EventFrame decode_event(const std::string& frame);
MembershipFrame decode_membership(const std::string& frame);
FailureReportFrame decode_failure_report(const std::string& frame);
SlateFetchFrame decode_slate_fetch(const std::string& frame);
SlateFetchReply decode_slate_fetch_reply(const std::string& frame);
ThrottleFrame decode_throttle(const std::string& frame);

}  // namespace wire
}  // namespace slateflow
