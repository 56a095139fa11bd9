#include "slateflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace slateflow {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) pos = s.size();
    std::string item = trim(s.substr(start, pos - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = pos + 1;
  }
  return out;
}

std::uint64_t parse_u64(std::string_view s, int line, const std::string& what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError(line, "invalid integer for " + what + ": '" + std::string(s) + "'");
  return v;
}

NodeAddress parse_address(std::string_view s, int line) {
  auto pos = s.rfind(':');
  if (pos == std::string_view::npos || pos == 0 || pos + 1 >= s.size())
    throw ConfigError(line, "expected host:port, got '" + std::string(s) + "'");
  std::uint64_t port = parse_u64(s.substr(pos + 1), line, "port");
  if (port == 0 || port > 65535) throw ConfigError(line, "port out of range");
  return NodeAddress{std::string(s.substr(0, pos)),
                     static_cast<std::uint16_t>(port)};
}

struct RawSection {
  std::string kind;  // "function", "cluster", "store", "streams", "runtime", "app"
  std::string arg;   // function name
  int line = 0;
  std::vector<std::tuple<std::string, std::string, int>> entries;  // key, value, line
};

}  // namespace

std::string ConfigError::join(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << "invalid configuration (" << v.size() << " violation"
     << (v.size() == 1 ? "" : "s") << ")";
  for (const auto& x : v) os << "\n  [" << x.code << "] " << x.message;
  return os.str();
}

ConfigError::ConfigError(std::vector<Violation> violations)
    : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

std::uint64_t parse_duration_ms(std::string_view text) {
  std::string s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty duration");
  std::uint64_t factor = 1;
  if (s.ends_with("ms")) {
    s.resize(s.size() - 2);
  } else if (s.ends_with('s')) {
    factor = 1000;
    s.resize(s.size() - 1);
  } else if (s.ends_with('m')) {
    factor = 60 * 1000;
    s.resize(s.size() - 1);
  } else if (s.ends_with('h')) {
    factor = 3600 * 1000;
    s.resize(s.size() - 1);
  }
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument("invalid duration: '" + std::string(text) + "'");
  return v * factor;
}

AppConfig parse_config(std::string_view text) {
  if (trim(text).empty()) throw ConfigError(1, "empty configuration");

  // Pass 1: tokenize into sections.
  std::vector<RawSection> sections;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++lineno;
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(lineno, "unterminated section header");
      std::string inner = trim(std::string_view(line).substr(1, line.size() - 2));
      RawSection sec;
      sec.line = lineno;
      auto sp = inner.find(' ');
      if (sp == std::string::npos) {
        sec.kind = inner;
      } else {
        sec.kind = trim(std::string_view(inner).substr(0, sp));
        sec.arg = trim(std::string_view(inner).substr(sp + 1));
      }
      if (sec.kind.empty()) throw ConfigError(lineno, "empty section header");
      sections.push_back(std::move(sec));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(lineno, "expected key = value, got '" + line + "'");
    if (sections.empty())
      throw ConfigError(lineno, "key outside of any [section]");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(lineno, "empty key");
    sections.back().entries.emplace_back(std::move(key), std::move(value), lineno);
  }

  // Pass 2: interpret.
  AppConfig cfg;
  std::vector<Violation> violations;
  bool saw_cluster = false;

  for (const auto& sec : sections) {
    if (sec.kind == "function") {
      if (sec.arg.empty())
        throw ConfigError(sec.line, "[function] requires a name: [function M1]");
      FunctionDef f;
      f.name = sec.arg;
      f.op_class = sec.arg;
      bool kind_set = false;
      bool saw_ttl = false, saw_flush = false, saw_end_flush = false;
      for (const auto& [key, value, ln] : sec.entries) {
        if (key == "kind") {
          if (value == "map") f.kind = FunctionKind::Map;
          else if (value == "update") f.kind = FunctionKind::Update;
          else throw ConfigError(ln, "kind must be map or update");
          kind_set = true;
        } else if (key == "subscribe") {
          f.subscriptions = split_list(value);
        } else if (key == "publish") {
          f.publishes = split_list(value);
        } else if (key == "class") {
          f.op_class = value;
        } else if (key == "ttl") {
          saw_ttl = true;
          if (value == "forever") f.ttl = Ttl::forever();
          else {
            try {
              f.ttl = Ttl::of_millis(parse_duration_ms(value));
            } catch (const std::invalid_argument& e) {
              throw ConfigError(ln, e.what());
            }
          }
        } else if (key == "flush") {
          saw_flush = true;
          if (value == "write_through") {
            f.flush = {FlushPolicy::Kind::WriteThrough, 0};
          } else if (value == "on_evict") {
            f.flush = {FlushPolicy::Kind::OnEvict, 0};
          } else if (value.starts_with("interval:")) {
            try {
              f.flush = {FlushPolicy::Kind::Interval,
                         parse_duration_ms(std::string_view(value).substr(9))};
            } catch (const std::invalid_argument& e) {
              throw ConfigError(ln, e.what());
            }
          } else {
            throw ConfigError(ln, "flush must be write_through, interval:<dur> or on_evict");
          }
        } else if (key == "end_flush") {
          saw_end_flush = true;
          f.end_flush = (value == "true" || value == "1" || value == "yes");
        } else {
          throw ConfigError(ln, "unknown function key '" + key + "'");
        }
      }
      if (!kind_set) throw ConfigError(sec.line, "function '" + f.name + "' missing kind");
      if (f.kind == FunctionKind::Map) {
        if (saw_ttl)
          violations.push_back({"ttl-on-map", "map '" + f.name + "' sets ttl"});
        if (saw_flush)
          violations.push_back({"flush-on-map", "map '" + f.name + "' sets flush policy"});
        if (saw_end_flush)
          violations.push_back({"end-flush-on-map", "map '" + f.name + "' sets end_flush"});
      }
      std::sort(f.subscriptions.begin(), f.subscriptions.end());
      f.subscriptions.erase(
          std::unique(f.subscriptions.begin(), f.subscriptions.end()),
          f.subscriptions.end());
      cfg.workflow.functions.push_back(std::move(f));
    } else if (sec.kind == "cluster") {
      saw_cluster = true;
      for (const auto& [key, value, ln] : sec.entries) {
        if (key == "nodes") {
          for (const auto& a : split_list(value))
            cfg.nodes.push_back(parse_address(a, ln));
        } else if (key == "master") {
          cfg.master = parse_address(value, ln);
        } else {
          throw ConfigError(ln, "unknown cluster key '" + key + "'");
        }
      }
    } else if (sec.kind == "store") {
      for (const auto& [key, value, ln] : sec.entries) {
        if (key == "path") cfg.store.path = value;
        else if (key == "consistency") {
          if (value == "one") cfg.store.consistency = Consistency::One;
          else if (value == "quorum") cfg.store.consistency = Consistency::Quorum;
          else if (value == "all") cfg.store.consistency = Consistency::All;
          else throw ConfigError(ln, "consistency must be one, quorum or all");
        } else if (key == "replicas") {
          auto v = parse_u64(value, ln, "replicas");
          if (v < 1 || v > 64) throw ConfigError(ln, "replicas out of range [1,64]");
          cfg.store.replicas = static_cast<int>(v);
        } else {
          throw ConfigError(ln, "unknown store key '" + key + "'");
        }
      }
    } else if (sec.kind == "streams") {
      for (const auto& [key, value, ln] : sec.entries) {
        if (key == "external") {
          for (auto& s : split_list(value)) cfg.workflow.external_inputs.insert(s);
        } else if (key == "internal") {
          for (auto& s : split_list(value)) cfg.workflow.internal_streams.insert(s);
        } else if (key == "outputs") {
          for (auto& s : split_list(value)) cfg.workflow.output_streams.insert(s);
        } else if (key.starts_with("overflow.")) {
          std::string sid = key.substr(9);
          OverflowPolicy p;
          if (value == "drop") {
            p.kind = OverflowPolicy::Kind::DropAndLog;
          } else if (value.starts_with("overflow:")) {
            p.kind = OverflowPolicy::Kind::OverflowStream;
            p.target = trim(std::string_view(value).substr(9));
            if (p.target.empty()) throw ConfigError(ln, "overflow: requires a stream name");
          } else if (value == "throttle_source") {
            p.kind = OverflowPolicy::Kind::ThrottleSource;
          } else {
            throw ConfigError(ln, "overflow policy must be drop, overflow:<stream> or throttle_source");
          }
          cfg.overflow[sid] = p;
        } else if (key.starts_with("input.")) {
          cfg.source_inputs[key.substr(6)] = value;
        } else {
          throw ConfigError(ln, "unknown streams key '" + key + "'");
        }
      }
    } else if (sec.kind == "runtime") {
      for (const auto& [key, value, ln] : sec.entries) {
        if (key == "queue_capacity") {
          cfg.runtime.queue_capacity = parse_u64(value, ln, "queue_capacity");
        } else if (key == "workers") {
          cfg.runtime.workers = static_cast<int>(parse_u64(value, ln, "workers"));
        } else if (key == "theta") {
          try {
            cfg.runtime.theta = std::stod(value);
          } catch (...) {
            throw ConfigError(ln, "invalid theta");
          }
          if (cfg.runtime.theta <= 0.0 || cfg.runtime.theta >= 1.0)
            throw ConfigError(ln, "theta must be in (0,1)");
        } else if (key == "divert_floor") {
          cfg.runtime.divert_floor = parse_u64(value, ln, "divert_floor");
        } else if (key == "flush_tick") {
          try {
            cfg.runtime.flush_tick_ms = parse_duration_ms(value);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(ln, e.what());
          }
        } else if (key == "audit_contention") {
          cfg.runtime.audit_contention = (value == "true" || value == "1");
        } else if (key == "http_offset") {
          cfg.runtime.http_offset = static_cast<int>(parse_u64(value, ln, "http_offset"));
        } else if (key == "connect_timeout") {
          try {
            cfg.runtime.connect_timeout_ms = parse_duration_ms(value);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(ln, e.what());
          }
        } else if (key == "slate_cache_capacity") {
          cfg.runtime.slate_cache_capacity =
              parse_u64(value, ln, "slate_cache_capacity");
          if (cfg.runtime.slate_cache_capacity < 1)
            throw ConfigError(ln, "slate_cache_capacity must be >= 1");
        } else {
          throw ConfigError(ln, "unknown runtime key '" + key + "'");
        }
      }
    } else if (sec.kind == "app") {
      for (const auto& [key, value, ln] : sec.entries) cfg.app[key] = value;
    } else {
      throw ConfigError(sec.line, "unknown section '" + sec.kind + "'");
    }
  }

  // Semantic checks.
  auto structural = validate_workflow(cfg.workflow);
  violations.insert(violations.end(), structural.begin(), structural.end());

  if (!saw_cluster || cfg.nodes.empty())
    violations.push_back({"empty-cluster", "[cluster] must list at least one node"});
  if (cfg.runtime.queue_capacity < 1)
    violations.push_back({"bad-queue-capacity", "queue_capacity must be >= 1"});
  if (cfg.runtime.workers < 1)
    violations.push_back({"bad-workers", "workers must be >= 1"});

  for (const auto& [sid, policy] : cfg.overflow) {
    if (!cfg.workflow.stream_known(sid)) {
      violations.push_back({"overflow-unknown-stream",
                            "overflow policy for undeclared stream '" + sid + "'"});
      continue;
    }
    if (policy.kind == OverflowPolicy::Kind::OverflowStream) {
      if (!cfg.workflow.stream_known(policy.target))
        violations.push_back({"overflow-target-unknown",
                              "overflow target '" + policy.target + "' is not declared"});
      else if (cfg.workflow.is_external_input(policy.target))
        violations.push_back({"overflow-target-external",
                              "overflow target '" + policy.target + "' is an external input"});
      else if (cfg.workflow.subscribers_of(policy.target).empty())
        violations.push_back({"overflow-target-unsubscribed",
                              "overflow target '" + policy.target + "' has no subscribers"});
    } else if (policy.kind == OverflowPolicy::Kind::ThrottleSource) {
      if (!cfg.workflow.traces_to_external_inputs(sid))
        violations.push_back(
            {"throttle-untraceable",
             "throttle_source on '" + sid +
                 "' requires every producer chain to trace to external inputs "
                 "(declare publish= on producing functions)"});
    }
  }
  for (const auto& [sid, path] : cfg.source_inputs) {
    if (!cfg.workflow.is_external_input(sid))
      violations.push_back({"input-not-external",
                            "input file bound to non-external stream '" + sid + "'"});
  }

  std::sort(violations.begin(), violations.end(), [](const auto& a, const auto& b) {
    return std::tie(a.code, a.message) < std::tie(b.code, b.message);
  });
  violations.erase(std::unique(violations.begin(), violations.end(),
                               [](const auto& a, const auto& b) {
                                 return a.code == b.code && a.message == b.message;
                               }),
                   violations.end());
  if (!violations.empty()) throw ConfigError(std::move(violations));
  return cfg;
}

AppConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace slateflow
