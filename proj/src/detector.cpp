// Copyright 2026 The sbifuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sbifuzz/detector.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <iomanip>
#include <regex>
#include <sstream>

#include "sbifuzz/error.hpp"

namespace sbifuzz {

namespace fs = std::filesystem;

namespace {

constexpr std::pair<BugClass, std::string_view> kClassNames[] = {
    {BugClass::kUnhandledError500, "UnhandledError500"},
    {BugClass::kStatusMappingViolation, "StatusMappingViolation"},
    {BugClass::kAuthzScopeBypass, "AuthzScopeBypass"},
    {BugClass::kUndeclaredStatus, "UndeclaredStatus"},
};

std::string endpoint_of(const ExecutedExchange& e) {
  const auto sp = e.request.provenance.template_id;
  return sp.empty() ? e.request.method + " " + e.request.url : sp;
}

}  // namespace

std::string_view bug_class_name(BugClass c) {
  for (const auto& [k, v] : kClassNames) {
    if (k == c) return v;
  }
  return "Unknown";
}

std::optional<BugClass> parse_bug_class(std::string_view text) {
  for (const auto& [k, v] : kClassNames) {
    if (v == text) return k;
  }
  return std::nullopt;
}

std::string format_rfc3339(std::int64_t unix_seconds) {
  std::time_t t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string BugCandidate::checker() const {
  if (finding) return finding->checker_name;
  const auto& m = evidence.request.provenance.mutation;
  const auto colon = m.find(':');
  return colon == std::string::npos ? m : m.substr(0, colon);
}

Json BugCandidate::to_json() const {
  Json j{{"bug_class", bug_class_name(bug_class)}, {"evidence", evidence.to_json()}};
  j["finding"] = finding ? finding->to_json() : Json(nullptr);
  j["minimal_sequence"] = minimal_sequence.to_json();
  return j;
}

BugCandidate BugCandidate::from_json(const Json& j) {
  BugCandidate c;
  auto cls = parse_bug_class(j.at("bug_class").get<std::string>());
  if (!cls) throw Error(Errc::kParseError, "unknown bug class");
  c.bug_class = *cls;
  c.evidence = ExecutedExchange::from_json(j.at("evidence"));
  if (j.contains("finding") && j.at("finding").is_object()) {
    c.finding = CheckerFinding::from_json(j.at("finding"));
  }
  if (j.contains("minimal_sequence")) c.minimal_sequence = TestSequence::from_json(j.at("minimal_sequence"));
  return c;
}

std::optional<BugCandidate> classify(const ExecutedExchange& exchange, const RequestTemplate& tmpl,
                                     const CheckerFinding* finding) {
  if (exchange.failed()) return std::nullopt;
  BugCandidate c;
  c.evidence = exchange;
  if (finding && finding->checker_name == kCrossServiceToken) {
    if (!exchange.success()) return std::nullopt;
    c.bug_class = BugClass::kAuthzScopeBypass;
    c.finding = *finding;
    return c;
  }
  if (exchange.status == 500 && !tmpl.declares(500)) {
    c.bug_class = BugClass::kUnhandledError500;
    return c;
  }
  if (finding && finding->checker_name == kStatusMapping) {
    if (finding->kind == "status-mapping") {
      c.bug_class = BugClass::kStatusMappingViolation;
    } else if (finding->kind == "undeclared-status") {
      c.bug_class = BugClass::kUndeclaredStatus;
    } else {
      return std::nullopt;
    }
    c.finding = *finding;
    return c;
  }
  return std::nullopt;
}

std::string normalize_body(std::string_view body) {
  static const std::regex uuid(
      "[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}");
  static const std::regex ts(
      "[0-9]{4}-[0-9]{2}-[0-9]{2}[Tt][0-9]{2}:[0-9]{2}:[0-9]{2}(\\.[0-9]+)?([Zz]|[+-][0-9]{2}:[0-9]{2})");
  static const std::regex digits("[0-9]{4,}");
  std::string out(body);
  out = std::regex_replace(out, uuid, "<uuid>");
  out = std::regex_replace(out, ts, "<ts>");
  out = std::regex_replace(out, digits, "<num>");
  return out;
}

std::string body_fingerprint(std::string_view body) { return sha256_hex(normalize_body(body)); }

std::string BucketKey::str() const {
  return std::string(bug_class_name(bug_class)) + "|" + endpoint + "|" + checker + "|" +
         std::to_string(status) + "|" + fingerprint;
}

std::string BucketKey::dir_name() const {
  std::string ep;
  for (char ch : endpoint) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-';
    if (ok) {
      ep += ch;
    } else if (ep.empty() || ep.back() != '_') {
      ep += '_';
    }
  }
  while (!ep.empty() && ep.back() == '_') ep.pop_back();
  // The full-key hash keeps names unique when sanitizing collapses endpoints.
  return std::string(bug_class_name(bug_class)) + "-" + ep + "-" + checker + "-" +
         std::to_string(status) + "-" + sha256_hex(str()).substr(0, 12);
}

Json BucketKey::to_json() const {
  return Json{{"bug_class", bug_class_name(bug_class)},
              {"endpoint", endpoint},
              {"checker", checker},
              {"status", status},
              {"fingerprint", fingerprint}};
}

BucketKey BucketKey::from_json(const Json& j) {
  BucketKey k;
  auto cls = parse_bug_class(j.at("bug_class").get<std::string>());
  if (!cls) throw Error(Errc::kParseError, "unknown bug class");
  k.bug_class = *cls;
  k.endpoint = j.at("endpoint").get<std::string>();
  k.checker = j.at("checker").get<std::string>();
  k.status = j.at("status").get<int>();
  k.fingerprint = j.at("fingerprint").get<std::string>();
  return k;
}

BucketKey bucket_key(const BugCandidate& c) {
  return BucketKey{c.bug_class, endpoint_of(c.evidence), c.checker(), c.evidence.status,
                   body_fingerprint(c.evidence.response_body)};
}

Json BugReport::to_json() const {
  return Json{{"bucket_key", key.to_json()},
              {"bucket", key.dir_name()},
              {"first_seen", first_seen},
              {"occurrence_count", occurrence_count},
              {"candidate", first.to_json()}};
}

BugReport BugReport::from_json(const Json& j) {
  BugReport r;
  r.key = BucketKey::from_json(j.at("bucket_key"));
  r.first_seen = j.value("first_seen", "");
  r.occurrence_count = j.value("occurrence_count", std::uint64_t{0});
  r.first = BugCandidate::from_json(j.at("candidate"));
  return r;
}

bool Detector::ingest(BugCandidate candidate) {
  auto key = bucket_key(candidate);
  auto it = reports_.find(key);
  if (it != reports_.end()) {
    ++it->second.occurrence_count;
    return false;
  }
  BugReport r;
  r.key = key;
  r.first_seen = format_rfc3339(clock_());
  r.occurrence_count = 1;
  r.first = std::move(candidate);
  reports_.emplace(std::move(key), std::move(r));
  return true;
}

std::set<std::string> Detector::bucket_keys() const {
  std::set<std::string> out;
  for (const auto& [k, r] : reports_) out.insert(k.str());
  return out;
}

std::map<std::string, std::uint64_t> Detector::count_by_class() const {
  std::map<std::string, std::uint64_t> out;
  for (const auto& [k, r] : reports_) ++out[std::string(bug_class_name(k.bug_class))];
  return out;
}

std::map<BucketKey, BugReport> bucket(const std::vector<BugCandidate>& candidates, Clock clock) {
  Detector d(std::move(clock));
  for (const auto& c : candidates) d.ingest(c);
  return d.reports();
}

Json ReplayDocument::to_json() const {
  Json t = Json::array();
  for (const auto& tmpl : templates) t.push_back(tmpl.to_json());
  Json j{{"sequence", sequence.to_json()},
         {"templates", t},
         {"expected_class", bug_class_name(expected_class)},
         {"expected_status", expected_status},
         {"checker", checker}};
  j["token"] = token ? token->to_json() : Json(nullptr);
  return j;
}

ReplayDocument ReplayDocument::from_json(const Json& j) {
  ReplayDocument d;
  d.sequence = TestSequence::from_json(j.at("sequence"));
  for (const auto& t : j.at("templates")) d.templates.push_back(RequestTemplate::from_json(t));
  if (d.templates.size() != d.sequence.steps.size()) {
    throw Error(Errc::kParseError, "replay needs one template per step");
  }
  for (std::size_t i = 0; i < d.templates.size(); ++i) {
    if (d.templates[i].template_id != d.sequence.steps[i].template_id) {
      throw Error(Errc::kParseError, "template order does not match the sequence");
    }
    if (!d.sequence.steps[i].parts) throw Error(Errc::kParseError, "step without request parts");
  }
  auto cls = parse_bug_class(j.at("expected_class").get<std::string>());
  if (!cls) throw Error(Errc::kParseError, "unknown bug class");
  d.expected_class = *cls;
  d.expected_status = j.at("expected_status").get<int>();
  d.checker = j.value("checker", "");
  if (j.contains("token") && j.at("token").is_object()) d.token = TokenProviderConfig::from_json(j.at("token"));
  return d;
}

ReplayDocument build_replay(const BugReport& report, const Grammar& grammar,
                            const std::optional<TokenProviderConfig>& token) {
  ReplayDocument d;
  d.sequence = report.first.minimal_sequence;
  for (const auto& step : d.sequence.steps) {
    const auto* tmpl = grammar.find(step.template_id);
    if (!tmpl) throw Error(Errc::kConfigError, "template not in grammar: " + step.template_id);
    d.templates.push_back(*tmpl);
  }
  d.expected_class = report.key.bug_class;
  d.expected_status = report.key.status;
  d.checker = report.key.checker;
  d.token = token;
  return d;
}

fs::path write_report(const BugReport& report, const ReplayDocument& replay, const fs::path& out_dir) {
  const auto dir = out_dir / report.key.dir_name();
  try {
    fs::create_directories(dir);
  } catch (const fs::filesystem_error& e) {
    throw Error(Errc::kIOError, e.what());
  }
  write_file(dir / "report.json", report.to_json().dump(2) + "\n");
  write_file(dir / "replay.json", replay.to_json().dump(2) + "\n");
  return dir;
}

std::vector<BugReport> load_reports(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::kIOError, "not a directory: " + dir.string());
  std::vector<BugReport> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto file = entry.path() / "report.json";
    if (!entry.is_directory() || !fs::exists(file)) continue;
    auto j = Json::parse(read_file(file), nullptr, false);
    if (j.is_discarded()) throw Error(Errc::kParseError, "unreadable report: " + file.string());
    out.push_back(BugReport::from_json(j));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

std::string summary_table(const std::vector<BugReport>& reports) {
  std::size_t w_class = 5, w_ep = 8, w_chk = 7;
  for (const auto& r : reports) {
    w_class = std::max(w_class, bug_class_name(r.key.bug_class).size());
    w_ep = std::max(w_ep, r.key.endpoint.size());
    w_chk = std::max(w_chk, r.key.checker.size());
  }
  std::ostringstream os;
  auto row = [&](std::string_view c, std::string_view e, std::string_view k, std::string_view s,
                 std::string_view n) {
    os << std::left << std::setw(static_cast<int>(w_class)) << c << "  " << std::setw(static_cast<int>(w_ep))
       << e << "  " << std::setw(static_cast<int>(w_chk)) << k << "  " << std::setw(6) << s << "  " << n
       << "\n";
  };
  row("class", "endpoint", "checker", "status", "count");
  for (const auto& r : reports) {
    row(bug_class_name(r.key.bug_class), r.key.endpoint, r.key.checker, std::to_string(r.key.status),
        std::to_string(r.occurrence_count));
  }
  os << reports.size() << " bucket(s)\n";
  return os.str();
}

}  // namespace sbifuzz
