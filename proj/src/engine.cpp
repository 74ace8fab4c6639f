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

#include "sbifuzz/engine.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <thread>

#include "sbifuzz/error.hpp"
#include "sbifuzz/yaml_io.hpp"

namespace sbifuzz {

namespace fs = std::filesystem;

// ---- config -----------------------------------------------------------------

Json CheckerSettings::to_json() const {
  return Json{{"payload_body", payload_body},
              {"optional_omission", optional_omission},
              {"malformed_value", malformed_value},
              {"cross_service_token", cross_service_token},
              {"status_mapping", status_mapping},
              {"payload_cap", payload_cap},
              {"malformed_cap", malformed_cap}};
}

CheckerSettings CheckerSettings::from_json(const Json& j) {
  CheckerSettings c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw Error(Errc::kConfigError, "checkers must be a mapping");
  for (const auto& [k, v] : j.items()) {
    auto flag = [&](bool& field) {
      if (!v.is_boolean()) throw Error(Errc::kConfigError, "checkers." + k + " must be a boolean");
      field = v.get<bool>();
    };
    auto cap = [&](std::size_t& field) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw Error(Errc::kConfigError, "checkers." + k + " must be a non-negative integer");
      }
      field = v.get<std::size_t>();
    };
    if (k == "payload_body") flag(c.payload_body);
    else if (k == "optional_omission") flag(c.optional_omission);
    else if (k == "malformed_value") flag(c.malformed_value);
    else if (k == "cross_service_token") flag(c.cross_service_token);
    else if (k == "status_mapping") flag(c.status_mapping);
    else if (k == "payload_cap") cap(c.payload_cap);
    else if (k == "malformed_cap") cap(c.malformed_cap);
    else throw Error(Errc::kConfigError, "unknown checker setting: " + k);
  }
  return c;
}

namespace {

fs::path resolve_against(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

template <typename T>
T number_field(const Json& j, const char* name, T fallback) {
  if (!j.contains(name) || j.at(name).is_null()) return fallback;
  const auto& v = j.at(name);
  if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw Error(Errc::kConfigError, std::string(name) + " must be a number");
  } else {
    if (!v.is_number_integer()) throw Error(Errc::kConfigError, std::string(name) + " must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        throw Error(Errc::kConfigError, std::string(name) + " must not be negative");
      }
    }
  }
  return v.get<T>();
}

std::optional<std::string> origin_of(std::string_view url) {
  auto u = parse_url(url);
  if (!u) return std::nullopt;
  return u->origin();
}

}  // namespace

CampaignConfig CampaignConfig::from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::kConfigError, "campaign config must be a mapping");
  static const std::set<std::string> known{
      "grammar", "targets", "budget", "max_sequence_length", "seed", "checkers", "rate_limit",
      "token", "workers", "renderings", "optional_presence", "retries", "hosts"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw Error(Errc::kConfigError, "unknown campaign key: " + k);
  }
  CampaignConfig c;
  if (!j.contains("grammar") || !j.at("grammar").is_string()) {
    throw Error(Errc::kConfigError, "grammar path is required");
  }
  c.grammar_path = resolve_against(base_dir, j.at("grammar").get<std::string>());
  if (j.contains("targets")) {
    if (!j.at("targets").is_array()) throw Error(Errc::kConfigError, "targets must be a list");
    for (const auto& t : j.at("targets")) {
      if (!t.is_string()) throw Error(Errc::kConfigError, "targets must be strings");
      c.targets.push_back(t.get<std::string>());
    }
  }
  c.budget = number_field<std::uint64_t>(j, "budget", c.budget);
  c.max_sequence_length = number_field<int>(j, "max_sequence_length", c.max_sequence_length);
  c.seed = number_field<std::uint64_t>(j, "seed", c.seed);
  if (j.contains("checkers")) c.checkers = CheckerSettings::from_json(j.at("checkers"));
  c.rate_limit = number_field<double>(j, "rate_limit", c.rate_limit);
  if (j.contains("token") && !j.at("token").is_null()) {
    try {
      c.token = TokenProviderConfig::from_json(j.at("token"));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kConfigError, std::string("token: ") + e.what());
    }
    c.token->path = resolve_against(base_dir, c.token->path);
  }
  c.workers = number_field<int>(j, "workers", c.workers);
  c.renderings = number_field<int>(j, "renderings", c.renderings);
  c.optional_presence = number_field<double>(j, "optional_presence", c.optional_presence);
  c.retries = number_field<int>(j, "retries", c.retries);
  if (j.contains("hosts") && !j.at("hosts").is_null()) c.hosts = HostMap::from_json(j.at("hosts"));
  return c;
}

Json CampaignConfig::to_json() const {
  Json j{{"grammar", grammar_path.string()},
         {"targets", targets},
         {"budget", budget},
         {"max_sequence_length", max_sequence_length},
         {"seed", seed},
         {"checkers", checkers.to_json()},
         {"rate_limit", rate_limit}};
  j["token"] = token ? token->to_json() : Json(nullptr);
  j["workers"] = workers;
  j["renderings"] = renderings;
  j["optional_presence"] = optional_presence;
  j["retries"] = retries;
  j["hosts"] = hosts ? hosts->to_json() : Json(nullptr);
  return j;
}

CampaignConfig CampaignConfig::load(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(Errc::kConfigError, e.what());
  }
  Json j;
  try {
    j = parse_yaml(text);
  } catch (const Error& e) {
    throw Error(Errc::kConfigError, path.string() + ": " + e.what());
  }
  auto c = from_json(j, path.parent_path());
  c.validate();
  return c;
}

void CampaignConfig::validate() const {
  if (grammar_path.empty()) throw Error(Errc::kConfigError, "grammar path is required");
  if (budget == 0) throw Error(Errc::kConfigError, "budget must be > 0");
  if (max_sequence_length < 1) throw Error(Errc::kConfigError, "max_sequence_length must be >= 1");
  if (workers < 1) throw Error(Errc::kConfigError, "workers must be >= 1");
  if (renderings < 1) throw Error(Errc::kConfigError, "renderings must be >= 1");
  if (retries < 0) throw Error(Errc::kConfigError, "retries must be >= 0");
  if (rate_limit < 0) throw Error(Errc::kConfigError, "rate_limit must be >= 0");
  if (optional_presence < 0 || optional_presence > 1) {
    throw Error(Errc::kConfigError, "optional_presence must lie in [0, 1]");
  }
  if (targets.empty()) throw Error(Errc::kConfigError, "targets allowlist is empty");
  for (const auto& t : targets) {
    if (!origin_of(t)) throw Error(Errc::kConfigError, "bad target URL: " + t);
  }
  if (token && token->mode == TokenProviderConfig::Mode::kFetch && !allows(token->endpoint)) {
    throw Error(Errc::kConfigError, "token endpoint outside the targets allowlist: " + token->endpoint);
  }
  if (hosts) hosts->validate();
}

bool CampaignConfig::allows(const std::string& url) const {
  const auto origin = origin_of(url);
  if (!origin) return false;
  return std::any_of(targets.begin(), targets.end(),
                     [&](const std::string& t) { return origin_of(t) == origin; });
}

// ---- rate limiting ----------------------------------------------------------

RateLimiter::RateLimiter(double per_second) {
  if (per_second > 0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / per_second));
  }
}

void RateLimiter::acquire(const std::string& origin) {
  if (interval_.count() == 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    auto& next = next_[origin];
    slot = std::max(now, next);
    next = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

// ---- planning ---------------------------------------------------------------

SequencePlanner::SequencePlanner(const Grammar& grammar, int max_length)
    : grammar_(grammar), max_length_(max_length) {
  if (grammar.templates.empty()) throw Error(Errc::kConfigError, "grammar has no templates");
  for (const auto& t : grammar.templates) sorted_.push_back(&t);
  std::sort(sorted_.begin(), sorted_.end(),
            [](const auto* a, const auto* b) { return a->template_id < b->template_id; });
  for (const auto* t : sorted_) {
    if (t->consumes.empty()) roots_.push_back(t);
  }
  for (const auto* t : roots_) {
    TestSequence s;
    s.steps.push_back(SequenceStep{t->template_id, {}, std::nullopt, {}, "", ""});
    current_.push_back(std::move(s));
  }
}

std::vector<TestSequence> SequencePlanner::extend(const TestSequence& prefix) const {
  std::vector<TestSequence> out;
  for (const auto* t : sorted_) {
    std::map<std::string, HandleRef> sources;
    bool ok = true;
    for (const auto& slot : t->consumes) {
      std::optional<HandleRef> found;
      for (int j = static_cast<int>(prefix.steps.size()) - 1; j >= 0 && !found; --j) {
        for (const auto& e : grammar_.graph.edges) {
          if (e.producer == prefix.steps[j].template_id && e.consumer == t->template_id &&
              e.handle == slot) {
            found = HandleRef{j, e.field};
            break;
          }
        }
      }
      if (!found) {
        ok = false;
        break;
      }
      sources[slot] = *found;
    }
    if (!ok) continue;
    TestSequence s = prefix;
    s.steps.push_back(SequenceStep{t->template_id, std::move(sources), std::nullopt, {}, "", ""});
    out.push_back(std::move(s));
  }
  return out;
}

std::optional<TestSequence> SequencePlanner::next() {
  while (current_.empty()) {
    if (level_ >= max_length_ || retained_.empty()) return std::nullopt;
    ++level_;
    auto prefixes = std::move(retained_);
    retained_.clear();
    for (const auto& p : prefixes) {
      for (auto& s : extend(p)) current_.push_back(std::move(s));
    }
  }
  auto s = std::move(current_.front());
  current_.pop_front();
  return s;
}

void SequencePlanner::retain(const TestSequence& executed) { retained_.push_back(executed); }

// ---- execution --------------------------------------------------------------

namespace {

// Exchange coordinates stamped by send_with_retries; set by the caller.
thread_local std::uint64_t t_sequence_index = 0;
thread_local int t_rendering = 0;
thread_local int t_step = 0;

}  // namespace

std::optional<ExecutedExchange> send_with_retries(const ConcreteRequest& request,
                                                  const std::optional<SignedToken>& token,
                                                  const ExecutionHooks& hooks) {
  std::optional<ExecutedExchange> last;
  for (int attempt = 0; attempt <= hooks.retries; ++attempt) {
    if (hooks.admit && !hooks.admit(request)) return last;
    auto ex = make_exchange(request, hooks.transport->send(request), token);
    ex.sequence_index = t_sequence_index;
    ex.rendering = t_rendering;
    ex.step = t_step;
    if (hooks.sink) hooks.sink(ex);
    last = std::move(ex);
    if (!last->failed()) break;
  }
  return last;
}

SequenceRun execute_sequence(const TestSequence& plan, const Grammar& grammar,
                             const ExecutionHooks& hooks,
                             const std::function<ChoiceSource(std::size_t step)>& choices_for,
                             const InstantiateOptions& options) {
  SequenceRun run;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& step = plan.steps[i];
    const auto* tmpl = grammar.find(step.template_id);
    if (!tmpl) throw Error(Errc::kConfigError, "template not in grammar: " + step.template_id);

    std::map<std::string, std::string> bindings;
    for (const auto& [slot, ref] : step.sources) {
      auto value = extract_handle(run.exchanges.at(static_cast<std::size_t>(ref.step)), ref.field);
      if (!value) return run;
      bindings[slot] = *value;
    }
    ChoiceSource choices =
        step.parts ? ChoiceSource::replaying(step.provenance.choices) : choices_for(i);
    const auto seed = step.parts ? step.provenance.rng_seed : choices.seed();
    auto parts = instantiate_parts(*tmpl, grammar.dictionary, bindings, choices, options);
    Provenance prov;
    prov.template_id = tmpl->template_id;
    prov.choices = choices.tape();
    prov.rng_seed = seed;
    auto request = assemble(parts, prov);

    SequenceStep done{step.template_id, step.sources, parts, request.provenance, "", ""};
    std::optional<SignedToken> token;
    if (tmpl->requires_auth && hooks.tokens) {
      token = hooks.tokens(tmpl->service, tmpl->nf);
      if (token) {
        request = attach_token(request, *token);
        done.token_service = tmpl->service;
        done.token_nf = tmpl->nf;
      }
    }
    t_step = static_cast<int>(i);
    auto ex = send_with_retries(request, token, hooks);
    if (!ex) {
      run.stopped = true;
      return run;
    }
    run.executed.steps.push_back(std::move(done));
    run.exchanges.push_back(std::move(*ex));
    if (run.exchanges.back().failed()) return run;
  }
  run.all_success = std::all_of(run.exchanges.begin(), run.exchanges.end(),
                                [](const auto& e) { return e.success(); });
  return run;
}

// ---- campaign ---------------------------------------------------------------

Json CampaignSummary::to_json() const {
  Json counts = Json::object();
  for (const auto& [k, v] : bug_count_by_class) counts[k] = v;
  return Json{{"requests_sent", requests_sent},
              {"sequences_executed", sequences_executed},
              {"bug_count_by_class", counts},
              {"wall_time_s", wall_time_s},
              {"transport_failures", transport_failures},
              {"bucket_keys", bucket_keys},
              {"token_diagnostics", token_diagnostics}};
}

Grammar load_campaign_grammar(const CampaignConfig& config) {
  Grammar g;
  try {
    g = Grammar::load(config.grammar_path);
  } catch (const Error& e) {
    throw Error(Errc::kConfigError, e.what());
  }
  if (config.hosts) {
    for (auto& t : g.templates) {
      auto it = config.hosts->entries.find(t.nf);
      if (it != config.hosts->entries.end()) {
        t.origin = config.hosts->default_scheme + "://" + it->second;
      } else if (config.hosts->default_host) {
        t.origin = config.hosts->default_scheme + "://" + *config.hosts->default_host;
      }
    }
  }
  return g;
}

TokenProviderConfig token_config_for(const TokenProviderConfig& base, const std::string& service,
                                     const std::string& nf) {
  auto c = base;
  if (c.mode == TokenProviderConfig::Mode::kFetch) {
    c.request.requested_scope = service;
    c.request.target_nf_type = to_upper(nf);
  }
  return c;
}

namespace {

// Refuses origins outside the allowlist; used for token fetches.
class AllowlistTransport : public Transport {
 public:
  AllowlistTransport(std::shared_ptr<Transport> inner, const CampaignConfig& config)
      : inner_(std::move(inner)), config_(config) {}
  HttpResponse send(const ConcreteRequest& request) override {
    if (!config_.allows(request.url)) {
      HttpResponse r;
      r.transport_error = "not allowlisted: " + request.url;
      return r;
    }
    return inner_->send(request);
  }

 private:
  std::shared_ptr<Transport> inner_;
  const CampaignConfig& config_;
};

struct JobResult {
  std::vector<ExecutedExchange> log;
  std::vector<BugCandidate> candidates;
  std::optional<TestSequence> retained;
  bool stopped = false;
};

class Campaign {
 public:
  Campaign(const CampaignConfig& config, const fs::path& out_dir, std::shared_ptr<Transport> transport)
      : config_(config),
        out_dir_(out_dir),
        grammar_(load_campaign_grammar(config)),
        transport_(std::move(transport)),
        token_transport_(std::make_shared<AllowlistTransport>(transport_, config_)),
        limiter_(config.rate_limit) {
    options_.optional_presence = config.optional_presence;
  }

  CampaignSummary run() {
    const auto start = std::chrono::steady_clock::now();
    fs::create_directories(out_dir_);
    log_.open(out_dir_ / "exchanges.ndjson", std::ios::binary | std::ios::trunc);
    if (!log_) throw Error(Errc::kIOError, "cannot write " + (out_dir_ / "exchanges.ndjson").string());

    SequencePlanner planner(grammar_, config_.max_sequence_length);
    bool probes_done = false;
    std::deque<TestSequence> pending;
    while (!stopped_) {
      std::vector<TestSequence> batch;
      while (static_cast<int>(batch.size()) < config_.workers) {
        if (pending.empty()) {
          if (planner.level() == 1 && !probes_done && batch.empty() && level_drained(planner)) {
            probes_done = true;
            run_cross_service();
            if (stopped_) break;
          }
          // Never step into the next level while results of this one are in flight.
          if (!batch.empty() && level_drained(planner)) break;
          auto s = planner.next();
          if (!s) break;
          pending.push_back(std::move(*s));
        }
        batch.push_back(std::move(pending.front()));
        pending.pop_front();
      }
      if (batch.empty()) break;
      run_batch(batch, planner);
    }
    if (!probes_done && !stopped_) run_cross_service();

    log_.close();
    CampaignSummary summary;
    summary.requests_sent = requests_sent_;
    summary.sequences_executed = sequences_;
    summary.bug_count_by_class = detector_.count_by_class();
    summary.transport_failures = transport_failures_;
    for (const auto& k : detector_.bucket_keys()) summary.bucket_keys.push_back(k);
    summary.token_diagnostics = token_diagnostics_;
    for (const auto& [key, report] : detector_.reports()) {
      write_report(report, build_replay(report, grammar_, config_.token), out_dir_);
    }
    summary.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(out_dir_ / "summary.json", summary.to_json().dump(2) + "\n");
    return summary;
  }

 private:
  // Level 1 is finished once the planner has nothing left at that length.
  static bool level_drained(const SequencePlanner& planner) { return planner.pending() == 0; }

  ExecutionHooks hooks_for(JobResult& result) {
    ExecutionHooks h;
    h.transport = transport_.get();
    h.retries = config_.retries;
    h.tokens = [this](const std::string& service, const std::string& nf) { return token_for(service, nf); };
    h.admit = [this](const ConcreteRequest& r) { return admit(r); };
    h.sink = [&result](const ExecutedExchange& e) { result.log.push_back(e); };
    return h;
  }

  bool admit(const ConcreteRequest& request) {
    std::string origin;
    {
      std::lock_guard lock(mu_);
      if (requests_sent_ >= config_.budget) {
        stopped_ = true;
        return false;
      }
      if (!config_.allows(request.url)) {
        token_diagnostics_.push_back("refused non-allowlisted request: " + request.url);
        return false;
      }
      ++requests_sent_;
      origin = origin_of(request.url).value_or(request.url);
    }
    limiter_.acquire(origin);
    return true;
  }

  std::optional<SignedToken> token_for(const std::string& service, const std::string& nf) {
    if (!config_.token) return std::nullopt;
    TokenProvider* provider = nullptr;
    {
      std::lock_guard lock(mu_);
      const auto key = config_.token->mode == TokenProviderConfig::Mode::kFile ? std::string() : service;
      auto& slot = providers_[key];
      if (!slot) {
        slot = std::make_unique<TokenProvider>(token_config_for(*config_.token, service, nf),
                                               token_transport_);
      }
      provider = slot.get();
    }
    try {
      return provider->current();
    } catch (const Error& e) {
      std::lock_guard lock(mu_);
      const auto note = service + ": " + e.what();
      if (std::find(token_diagnostics_.begin(), token_diagnostics_.end(), note) == token_diagnostics_.end()) {
        token_diagnostics_.push_back(note);
      }
      return std::nullopt;
    }
  }

  std::optional<BugCandidate> analyze(const ExecutedExchange& ex, const RequestTemplate& tmpl,
                                      const TestSequence& seq, std::size_t step) const {
    std::optional<CheckerFinding> finding;
    if (config_.checkers.status_mapping) finding = status_mapping_checker(ex, tmpl);
    auto c = classify(ex, tmpl, finding ? &*finding : nullptr);
    if (c) c->minimal_sequence = minimal_sequence(seq, step);
    return c;
  }

  bool claim_checkers(const std::string& template_id) {
    std::lock_guard lock(mu_);
    return checked_.insert(template_id).second;
  }

  JobResult run_job(const TestSequence& plan, std::uint64_t index) {
    JobResult result;
    auto hooks = hooks_for(result);
    t_sequence_index = index;
    for (int r = 0; r < config_.renderings; ++r) {
      t_rendering = r;
      auto run = execute_sequence(
          plan, grammar_, hooks,
          [&](std::size_t step) {
            return ChoiceSource::recording(derive_seed(config_.seed, index, static_cast<std::uint64_t>(r), step));
          },
          options_);
      for (std::size_t i = 0; i < run.exchanges.size(); ++i) {
        const auto* tmpl = grammar_.find(run.executed.steps[i].template_id);
        if (auto c = analyze(run.exchanges[i], *tmpl, run.executed, i)) result.candidates.push_back(std::move(*c));
      }
      if (run.all_success && !result.retained) result.retained = run.executed;
      if (run.stopped) {
        result.stopped = true;
        return result;
      }
      const auto last = plan.steps.size() - 1;
      const bool last_sent = run.executed.steps.size() == plan.steps.size();
      const bool prefix_ok = last_sent && std::all_of(run.exchanges.begin(), run.exchanges.begin() + static_cast<std::ptrdiff_t>(last),
                                                      [](const auto& e) { return e.success(); });
      if (prefix_ok && claim_checkers(plan.steps[last].template_id)) {
        t_rendering = config_.renderings;
        if (!run_checkers(run, hooks, result)) {
          result.stopped = true;
          return result;
        }
      }
    }
    return result;
  }

  // Variants of the last step, sent after the prefix that made it reachable.
  bool run_checkers(const SequenceRun& run, const ExecutionHooks& hooks, JobResult& result) {
    const auto last = run.executed.steps.size() - 1;
    const auto& base_step = run.executed.steps[last];
    const auto& base_parts = *base_step.parts;
    const auto* tmpl = grammar_.find(base_step.template_id);
    const auto& bindings = base_parts.bindings;

    auto canonical = ChoiceSource::canonical();
    instantiate_parts(*tmpl, grammar_.dictionary, bindings, canonical, options_);

    struct Pending {
      CheckerVariant variant;
      std::vector<std::uint32_t> tape;
      std::uint64_t seed;
    };
    std::vector<Pending> variants;
    if (config_.checkers.optional_omission) {
      for (auto& v : optional_param_omission_checker(*tmpl, grammar_.dictionary, bindings)) {
        variants.push_back({std::move(v), canonical.tape(), 0});
      }
    }
    if (config_.checkers.malformed_value) {
      for (auto& v : malformed_value_checker(*tmpl, grammar_.dictionary, bindings, config_.checkers.malformed_cap)) {
        variants.push_back({std::move(v), canonical.tape(), 0});
      }
    }
    if (config_.checkers.payload_body && tmpl->body_schema) {
      for (auto& v : payload_body_checker(base_parts, *tmpl->body_schema, config_.checkers.payload_cap,
                                             tmpl->pinned_fields)) {
        variants.push_back({std::move(v), base_step.provenance.choices, base_step.provenance.rng_seed});
      }
    }

    t_step = static_cast<int>(last);
    for (std::size_t k = 0; k < variants.size(); ++k) {
      auto& p = variants[k];
      Provenance prov;
      prov.template_id = tmpl->template_id;
      prov.mutation = p.variant.mutation;
      prov.choices = p.tape;
      prov.rng_seed = p.seed;
      prov.variant_index = static_cast<int>(k);
      auto request = assemble(p.variant.parts, prov);
      SequenceStep step{tmpl->template_id, base_step.sources, p.variant.parts, request.provenance,
                        base_step.token_service, base_step.token_nf};
      std::optional<SignedToken> token;
      if (tmpl->requires_auth) {
        token = token_for(tmpl->service, tmpl->nf);
        if (token) request = attach_token(request, *token);
      }
      auto ex = send_with_retries(request, token, hooks);
      if (!ex) return false;
      TestSequence seq;
      seq.steps.assign(run.executed.steps.begin(), run.executed.steps.begin() + static_cast<std::ptrdiff_t>(last));
      seq.steps.push_back(std::move(step));
      if (auto c = analyze(*ex, *tmpl, seq, last)) result.candidates.push_back(std::move(*c));
    }
    return true;
  }

  void run_cross_service() {
    if (!config_.checkers.cross_service_token || !config_.token) return;
    for (auto& probe : cross_service_probes(grammar_)) {
      const auto index = sequences_++;
      JobResult result;
      auto hooks = hooks_for(result);
      t_sequence_index = index;
      t_rendering = 0;
      t_step = 0;
      auto token = token_for(probe.token_service, probe.token_nf);
      if (!token) continue;
      Provenance prov;
      prov.template_id = probe.target->template_id;
      prov.mutation = std::string(kCrossServiceToken) + ":" + probe.token_service;
      auto request = attach_token(assemble(probe.parts, prov), *token);
      auto ex = send_with_retries(request, token, hooks);
      if (ex) {
        TestSequence seq;
        seq.steps.push_back(SequenceStep{probe.target->template_id, {}, probe.parts, request.provenance,
                                         probe.token_service, probe.token_nf});
        auto finding = judge_cross_service(probe, *ex);
        std::optional<BugCandidate> c;
        if (finding) {
          c = classify(*ex, *probe.target, &*finding);
          if (c) c->minimal_sequence = seq;
        } else {
          c = analyze(*ex, *probe.target, seq, 0);
        }
        if (c) result.candidates.push_back(std::move(*c));
      } else {
        result.stopped = true;
      }
      intake(result, nullptr);
      if (stopped_) return;
    }
  }

  void run_batch(const std::vector<TestSequence>& batch, SequencePlanner& planner) {
    std::vector<JobResult> results;
    const auto first = sequences_;
    sequences_ += batch.size();
    if (batch.size() == 1) {
      results.push_back(run_job(batch[0], first));
    } else {
      std::vector<std::future<JobResult>> futures;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        futures.push_back(std::async(std::launch::async, [this, &batch, i, first] {
          return run_job(batch[i], first + i);
        }));
      }
      for (auto& f : futures) results.push_back(f.get());
    }
    for (auto& r : results) intake(r, &planner);
  }

  // Serialized, in plan order.
  void intake(JobResult& result, SequencePlanner* planner) {
    for (const auto& e : result.log) {
      if (e.failed()) ++transport_failures_;
      log_ << e.to_json().dump() << '\n';
    }
    for (auto& c : result.candidates) detector_.ingest(std::move(c));
    if (planner && result.retained) planner->retain(*result.retained);
    if (result.stopped) stopped_ = true;
  }

  const CampaignConfig& config_;
  fs::path out_dir_;
  Grammar grammar_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<Transport> token_transport_;
  RateLimiter limiter_;
  InstantiateOptions options_;
  Detector detector_;
  std::ofstream log_;

  std::mutex mu_;
  std::uint64_t requests_sent_ = 0;
  std::uint64_t sequences_ = 0;
  std::uint64_t transport_failures_ = 0;
  bool stopped_ = false;
  std::set<std::string> checked_;
  std::map<std::string, std::unique_ptr<TokenProvider>> providers_;
  std::vector<std::string> token_diagnostics_;
};

}  // namespace

CampaignSummary run_campaign(const CampaignConfig& config, const fs::path& out_dir,
                             std::shared_ptr<Transport> transport) {
  config.validate();
  if (!transport) transport = std::make_shared<HttpTransport>();
  Campaign campaign(config, out_dir, std::move(transport));
  return campaign.run();
}

}  // namespace sbifuzz
