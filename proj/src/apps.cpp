#include "slateflow/apps.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <regex>
#include <thread>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace slateflow {

namespace {

std::string app_setting(const AppConfig& cfg, const std::string& name,
                        const std::string& key, const std::string& fallback) {
  auto it = cfg.app.find(name + "." + key);
  if (it != cfg.app.end()) return it->second;
  it = cfg.app.find(key);
  return it == cfg.app.end() ? fallback : it->second;
}

std::uint64_t parse_count(const Bytes& text) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) return 0;
  return v;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::optional<std::string> retailer_match(const std::string& venue) {
  static const std::regex walmart("\\s*wal.*mart.*", std::regex::icase);
  static const std::regex samsclub("\\s*sam.*s\\s*club\\s*", std::regex::icase);
  if (std::regex_search(venue, walmart)) return "Walmart";
  if (std::regex_search(venue, samsclub)) return "Sam's Club";
  return std::nullopt;
}

std::optional<std::string> venue_of_checkin(const Bytes& value) {
  json j = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto it = j.find("venue");
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

RetailerMapper::RetailerMapper(const AppConfig& cfg, const std::string& name)
    : emit_stream_(app_setting(cfg, name, "emit_stream", "S_2")) {}

void RetailerMapper::map(EmitContext& ctx, const std::string&, const Bytes&,
                         const Bytes& value) {
  auto venue = venue_of_checkin(value);
  if (!venue) {
    undecodable_.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  auto retailer = retailer_match(*venue);
  if (!retailer) return;
  ctx.publish(emit_stream_, *retailer, value);
}

CounterUpdater::CounterUpdater(const AppConfig& cfg, const std::string& name) {
  delay_us_ = std::strtoull(
      app_setting(cfg, name, "delay_us", "0").c_str(), nullptr, 10);
}

std::uint64_t CounterUpdater::step(const Bytes* slate) {
  std::uint64_t count = 0;
  if (slate != nullptr) count = parse_count(*slate);  // unparsable resets to 0
  return count + 1;
}

void CounterUpdater::update(EmitContext& ctx, const std::string& stream,
                            const Bytes&, const Bytes&, const Bytes* slate) {
  if (stream == kFlushStream) return;
  if (delay_us_ > 0)
    std::this_thread::sleep_for(std::chrono::microseconds(delay_us_));
  ctx.replace_slate(std::to_string(step(slate)));
}

TopicTable TopicTable::parse(const std::string& text) {
  TopicTable table;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(';', start);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(start, end - start);
    start = end + 1;
    if (item.empty()) continue;
    Entry e;
    auto colon = item.find(':');
    if (colon == std::string::npos) {
      e.topic = item;
      e.keywords.push_back(lower(item));
    } else {
      e.topic = item.substr(0, colon);
      std::size_t k = colon + 1;
      while (k <= item.size()) {
        auto bar = item.find('|', k);
        if (bar == std::string::npos) bar = item.size();
        std::string kw = item.substr(k, bar - k);
        if (!kw.empty()) e.keywords.push_back(lower(kw));
        k = bar + 1;
      }
      if (e.keywords.empty()) e.keywords.push_back(lower(e.topic));
    }
    if (!e.topic.empty()) table.entries.push_back(std::move(e));
  }
  return table;
}

std::vector<std::string> TopicTable::classify(const std::string& text) const {
  std::string haystack = lower(text);
  std::vector<std::string> topics;
  for (const auto& e : entries) {
    for (const auto& kw : e.keywords) {
      if (haystack.find(kw) != std::string::npos) {
        topics.push_back(e.topic);
        break;
      }
    }
  }
  return topics;
}

TopicMapper::TopicMapper(const AppConfig& cfg, const std::string& name)
    : emit_stream_(app_setting(cfg, name, "emit_stream", "S_2")),
      table_(TopicTable::parse(app_setting(cfg, name, "topics", ""))) {}

void TopicMapper::map(EmitContext& ctx, const std::string&, const Bytes&,
                      const Bytes& value) {
  std::uint64_t m = minute_of(ctx.input_event().ts);
  for (const auto& topic : table_.classify(value))
    ctx.publish(emit_stream_, topic + "." + std::to_string(m), {});
}

MinuteCounterUpdater::MinuteCounterUpdater(const AppConfig& cfg,
                                           const std::string& name)
    : emit_stream_(app_setting(cfg, name, "emit_stream", "S_3")) {
  window_ms_ = std::strtoull(
      app_setting(cfg, name, "window_ms", "60000").c_str(), nullptr, 10);
}

void MinuteCounterUpdater::update(EmitContext& ctx, const std::string& stream,
                                  const Bytes& key, const Bytes&,
                                  const Bytes* slate) {
  std::uint64_t count = 0, first = 0;
  if (slate != nullptr) {
    json j = json::parse(*slate, nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
      count = j.value("count", std::uint64_t{0});
      first = j.value("first_millis", std::uint64_t{0});
    }
  }
  const Event& e = ctx.input_event();

  if (stream == kFlushStream) {
    // End of stream: close the trailing window.
    if (count > 0) {
      ctx.publish(emit_stream_, key, std::to_string(count));
      ctx.replace_slate(
          json{{"count", 0}, {"first_millis", first}}.dump());
    }
    return;
  }

  if (count == 0) {
    ctx.replace_slate(
        json{{"count", 1}, {"first_millis", e.ts.millis}}.dump());
    return;
  }
  if (e.ts.millis - first >= window_ms_) {
    // The closing event opens (and belongs to) the next window.
    ctx.publish(emit_stream_, key, std::to_string(count));
    ctx.replace_slate(
        json{{"count", 1}, {"first_millis", e.ts.millis}}.dump());
    return;
  }
  ctx.replace_slate(
      json{{"count", count + 1}, {"first_millis", first}}.dump());
}

HotDetectorUpdater::HotDetectorUpdater(const AppConfig& cfg,
                                       const std::string& name)
    : emit_stream_(app_setting(cfg, name, "emit_stream", "S_4")) {
  threshold_ = std::strtod(app_setting(cfg, name, "theta", "4").c_str(), nullptr);
}

void HotDetectorUpdater::update(EmitContext& ctx, const std::string& stream,
                                const Bytes& key, const Bytes& value,
                                const Bytes* slate) {
  if (stream == kFlushStream) return;
  std::uint64_t count = parse_count(value);

  std::optional<json> state;
  if (slate != nullptr) {
    json j = json::parse(*slate, nullptr, false);
    if (!j.is_discarded() && j.is_object()) state = std::move(j);
  }
  const Event& e = ctx.input_event();
  std::uint64_t day = day_index(e.ts);

  if (!state) {
    // Cold start: no average exists yet, so the ratio is defined as 1 and
    // the key is hot only below unit thresholds.
    if (count > 0 && 1.0 > threshold_)
      ctx.publish(emit_stream_, key, std::to_string(count));
    ctx.replace_slate(json{{"total_count", count},
                           {"days", 1},
                           {"first_day", day}}
                          .dump());
    return;
  }

  auto total = state->value("total_count", std::uint64_t{0});
  auto days = std::max<std::uint64_t>(1, state->value("days", std::uint64_t{1}));
  auto first_day = state->value("first_day", day);
  double avg = static_cast<double>(total) / static_cast<double>(days);
  if (count > 0 && avg > 0.0 &&
      static_cast<double>(count) / avg > threshold_)
    ctx.publish(emit_stream_, key, std::to_string(count));

  std::uint64_t new_days =
      std::max<std::uint64_t>(days, day >= first_day ? day - first_day + 1 : days);
  ctx.replace_slate(json{{"total_count", total + count},
                         {"days", new_days},
                         {"first_day", first_day}}
                        .dump());
}

SplitKeyMapper::SplitKeyMapper(const AppConfig& cfg, const std::string& name)
    : emit_stream_(app_setting(cfg, name, "emit_stream", "S_2")),
      by_hash_(app_setting(cfg, name, "mode", "round_robin") == "hash"),
      splitter_(static_cast<int>(std::strtoul(
          app_setting(cfg, name, "fanout", "2").c_str(), nullptr, 10))) {}

void SplitKeyMapper::map(EmitContext& ctx, const std::string&, const Bytes& key,
                         const Bytes& value) {
  Bytes derived = by_hash_
                      ? split_by_hash(key, splitter_.fanout(),
                                      std::to_string(ctx.input_event().ts.seq))
                      : splitter_.derive(key);
  ctx.publish(emit_stream_, std::move(derived), value);
}

PartialCountUpdater::PartialCountUpdater(const AppConfig& cfg,
                                         const std::string& name)
    : emit_stream_(app_setting(cfg, name, "emit_stream", "S_3")) {
  cadence_.events = std::strtoull(
      app_setting(cfg, name, "emit_every", "100").c_str(), nullptr, 10);
  cadence_.interval_ms = std::strtoull(
      app_setting(cfg, name, "emit_interval_ms", "1000").c_str(), nullptr, 10);
  if (cadence_.events == 0) cadence_.events = 1;
}

void PartialCountUpdater::update(EmitContext& ctx, const std::string& stream,
                                 const Bytes& key, const Bytes&,
                                 const Bytes* slate) {
  std::uint64_t count = 0, since_emit = 0, last_emit = 0;
  if (slate != nullptr) {
    json j = json::parse(*slate, nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
      count = j.value("count", std::uint64_t{0});
      since_emit = j.value("since_emit", std::uint64_t{0});
      last_emit = j.value("last_emit_millis", std::uint64_t{0});
    }
  }
  const Event& e = ctx.input_event();
  std::string base = split_base(key);
  int partial = split_index(key);

  auto emit_partial = [&](std::uint64_t total) {
    ctx.publish(emit_stream_, base,
                std::to_string(partial) + ":" + std::to_string(total));
  };

  if (stream == kFlushStream) {
    if (since_emit > 0) {
      emit_partial(count);
      ctx.replace_slate(json{{"count", count},
                             {"since_emit", 0},
                             {"last_emit_millis", last_emit}}
                            .dump());
    }
    return;
  }

  ++count;
  ++since_emit;
  if (count == 1) last_emit = e.ts.millis;
  bool due = since_emit >= cadence_.events ||
             e.ts.millis - last_emit >= cadence_.interval_ms;
  if (due) {
    emit_partial(count);
    since_emit = 0;
    last_emit = e.ts.millis;
  }
  ctx.replace_slate(json{{"count", count},
                         {"since_emit", since_emit},
                         {"last_emit_millis", last_emit}}
                        .dump());
}

PartialSumAggregator::PartialSumAggregator(const AppConfig&, const std::string&) {}

std::uint64_t PartialSumAggregator::total_of(const Bytes& slate) {
  json j = json::parse(slate, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return 0;
  return j.value("total", std::uint64_t{0});
}

void PartialSumAggregator::update(EmitContext& ctx, const std::string& stream,
                                  const Bytes&, const Bytes& value,
                                  const Bytes* slate) {
  if (stream == kFlushStream) return;
  json parts = json::object();
  if (slate != nullptr) {
    json j = json::parse(*slate, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("parts"))
      parts = j["parts"];
  }
  auto colon = value.find(':');
  if (colon == Bytes::npos) return;  // malformed partial: ignore
  parts[value.substr(0, colon)] = parse_count(value.substr(colon + 1));
  std::uint64_t total = 0;
  for (const auto& [k, v] : parts.items())
    total += v.get<std::uint64_t>();
  ctx.replace_slate(json{{"parts", parts}, {"total", total}}.dump());
}

void register_builtin_operators(OperatorRegistry& registry) {
  registry.register_mapper("retailer_map", [](const AppConfig& c, const std::string& n) {
    return std::make_unique<RetailerMapper>(c, n);
  });
  registry.register_updater("counter", [](const AppConfig& c, const std::string& n) {
    return std::make_unique<CounterUpdater>(c, n);
  });
  registry.register_mapper("topic_map", [](const AppConfig& c, const std::string& n) {
    return std::make_unique<TopicMapper>(c, n);
  });
  registry.register_updater("minute_counter", [](const AppConfig& c, const std::string& n) {
    return std::make_unique<MinuteCounterUpdater>(c, n);
  });
  registry.register_updater("hot_detector", [](const AppConfig& c, const std::string& n) {
    return std::make_unique<HotDetectorUpdater>(c, n);
  });
  registry.register_mapper("split_map", [](const AppConfig& c, const std::string& n) {
    return std::make_unique<SplitKeyMapper>(c, n);
  });
  registry.register_updater("partial_count", [](const AppConfig& c, const std::string& n) {
    return std::make_unique<PartialCountUpdater>(c, n);
  });
  registry.register_updater("partial_sum", [](const AppConfig& c, const std::string& n) {
    return std::make_unique<PartialSumAggregator>(c, n);
  });
}

}  // namespace slateflow
