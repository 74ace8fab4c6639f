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

#include "sbifuzz/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "sbifuzz/engine.hpp"
#include "sbifuzz/error.hpp"
#include "sbifuzz/mock_core.hpp"
#include "sbifuzz/replay.hpp"
#include "sbifuzz/yaml_io.hpp"

namespace sbifuzz {

namespace fs = std::filesystem;

namespace {

Json read_structured(const fs::path& path) {
  try {
    return parse_yaml(read_file(path));
  } catch (const Error& e) {
    throw Error(Errc::kConfigError, path.string() + ": " + e.what());
  }
}

std::optional<HostMap> load_hosts(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return HostMap::from_json(read_structured(path));
}

std::map<std::string, std::vector<Json>> load_overlay(const std::string& path) {
  std::map<std::string, std::vector<Json>> out;
  if (path.empty()) return out;
  const auto j = read_structured(path);
  if (!j.is_object()) throw Error(Errc::kConfigError, "overlay must map names to values");
  for (const auto& [k, v] : j.items()) {
    if (v.is_array()) {
      for (const auto& e : v) out[k].push_back(e);
    } else {
      out[k].push_back(v);
    }
  }
  return out;
}

std::vector<ResolvedSpec> load_specs(const std::vector<std::string>& files,
                                     const std::vector<std::string>& search,
                                     const std::optional<HostMap>& hosts) {
  std::vector<fs::path> dirs(search.begin(), search.end());
  std::vector<ResolvedSpec> specs;
  for (const auto& f : files) {
    auto spec = load_resolved(f, dirs);
    if (hosts) spec = rewrite_servers(spec, *hosts);
    specs.push_back(std::move(spec));
  }
  return specs;
}

Key key_from_env_or(const std::string& flag) {
  if (!flag.empty()) return key_from_string(flag);
  if (const char* env = std::getenv("SBIFUZZ_KEY"); env && *env) return key_from_string(env);
  throw Error(Errc::kConfigError, "no key: pass --key or set SBIFUZZ_KEY");
}

// Blocks until SIGINT/SIGTERM, or for `seconds` when positive.
void wait_for_stop(double seconds) {
  if (seconds > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    return;
  }
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  int sig = 0;
  sigwait(&set, &sig);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stateful grammar-based fuzzer for service-based core APIs"};
  app.require_subcommand(1);

  // bundle
  std::vector<std::string> bundle_specs, bundle_search;
  std::string bundle_out, bundle_hosts;
  auto* bundle = app.add_subcommand("bundle", "Resolve external refs into self-contained specs");
  bundle->add_option("specs", bundle_specs, "Spec files")->required()->check(CLI::ExistingFile);
  bundle->add_option("-o,--out", bundle_out, "Output directory")->required();
  bundle->add_option("--search-dir", bundle_search, "Extra directories for referenced files");
  bundle->add_option("--hosts", bundle_hosts, "Host map (JSON/YAML) for {apiRoot} servers");

  // compile
  std::vector<std::string> compile_specs, compile_search;
  std::string compile_out, compile_hosts, compile_overlay;
  auto* compile_cmd = app.add_subcommand("compile", "Compile bundled specs into a grammar");
  compile_cmd->add_option("specs", compile_specs, "Bundled spec files")->required()->check(CLI::ExistingFile);
  compile_cmd->add_option("-o,--out", compile_out, "grammar.json")->required();
  compile_cmd->add_option("--search-dir", compile_search, "Extra directories for referenced files");
  compile_cmd->add_option("--hosts", compile_hosts, "Host map for {apiRoot} servers");
  compile_cmd->add_option("--overlay", compile_overlay, "Dictionary overlay: name -> values");

  // testbed
  std::string tb_bugs, tb_mode = "CORRECT", tb_host = "127.0.0.1", tb_key, tb_seed, tb_hosts_out;
  int tb_base_port = 0;
  bool tb_deterministic = false, tb_crash_hard = false;
  double tb_duration = 0;
  auto* testbed = app.add_subcommand("testbed", "Run the mock core until interrupted");
  testbed->add_option("--bugs", tb_bugs, "B1,B3,B8 or all");
  testbed->add_option("--verifier-mode", tb_mode, "CORRECT | SEEDED_SCOPE_SHADOW | FREE5GC_MINIMAL");
  testbed->add_flag("--deterministic", tb_deterministic, "Fixed ids and frozen token clock");
  testbed->add_option("--bind-base", tb_host, "Bind address");
  testbed->add_option("--base-port", tb_base_port, "First port; NFs take consecutive ports (0 = ephemeral)");
  testbed->add_option("--key", tb_key, "Shared secret (else SBIFUZZ_KEY)");
  testbed->add_option("--seed-data", tb_seed, "Seeded subscriber data (JSON/YAML)");
  testbed->add_flag("--crash-hard", tb_crash_hard, "A panicking route stays down");
  testbed->add_option("--duration", tb_duration, "Stop after this many seconds");
  testbed->add_option("--hosts-out", tb_hosts_out, "Write the host map here once serving");

  // fuzz
  std::string fuzz_config, fuzz_out;
  std::optional<std::uint64_t> fuzz_seed, fuzz_budget;
  auto* fuzz = app.add_subcommand("fuzz", "Run a campaign");
  fuzz->add_option("-c,--config", fuzz_config, "campaign.yaml")->required()->check(CLI::ExistingFile);
  fuzz->add_option("-o,--out", fuzz_out, "Reports directory")->required();
  fuzz->add_option("--seed", fuzz_seed, "Override the campaign seed");
  fuzz->add_option("--budget", fuzz_budget, "Override the request budget");

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarize a reports directory");
  report->add_option("dir", report_dir, "Reports directory")->required();

  // replay
  std::string replay_path, replay_hosts, replay_token;
  std::vector<std::string> replay_host_pairs;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a report against a target");
  replay_cmd->add_option("file", replay_path, "replay.json")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--hosts", replay_hosts, "Host map for the target");
  replay_cmd->add_option("--host", replay_host_pairs, "nf=host:port override, repeatable");
  replay_cmd->add_option("--token-endpoint", replay_token, "Token endpoint override");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*bundle) {
      const auto specs = load_specs(bundle_specs, bundle_search, load_hosts(bundle_hosts));
      fs::create_directories(bundle_out);
      for (const auto& s : specs) out << write_bundle(s, bundle_out).string() << "\n";
      return kExitOk;
    }

    if (*compile_cmd) {
      const auto specs = load_specs(compile_specs, compile_search, load_hosts(compile_hosts));
      std::vector<Diagnostic> warnings;
      const auto grammar = compile_grammar(specs, load_overlay(compile_overlay), {}, &warnings);
      for (const auto& w : warnings) err << "warning: " << w.kind << " " << w.location << ": " << w.message << "\n";
      const fs::path target(compile_out);
      if (target.has_parent_path()) fs::create_directories(target.parent_path());
      grammar.save(target);
      out << grammar.templates.size() << " templates, " << grammar.graph.edges.size()
          << " dependency edges -> " << target.string() << "\n";
      return kExitOk;
    }

    if (*testbed) {
      TestbedConfig cfg;
      cfg.bind_host = tb_host;
      cfg.key = key_from_env_or(tb_key);
      auto mode = parse_verifier_mode(tb_mode);
      if (!mode) throw Error(Errc::kConfigError, "unknown verifier mode: " + tb_mode);
      cfg.verifier_mode = *mode;
      cfg.bugs = parse_bug_flags(tb_bugs);
      cfg.deterministic = tb_deterministic;
      cfg.crash_hard = tb_crash_hard;
      if (tb_base_port > 0) cfg.use_base_port(tb_base_port);
      if (!tb_seed.empty()) cfg.seed = SeedData::from_json(read_structured(tb_seed));
      auto bed = Testbed::start(cfg);
      const auto hosts = bed->host_map().to_json().dump(2);
      if (!tb_hosts_out.empty()) write_file(tb_hosts_out, hosts + "\n");
      out << hosts << "\n" << "token endpoint: " << bed->token_endpoint() << "\n";
      out.flush();
      wait_for_stop(tb_duration);
      bed->shutdown();
      return kExitOk;
    }

    if (*fuzz) {
      auto cfg = CampaignConfig::load(fuzz_config);
      if (fuzz_seed) cfg.seed = *fuzz_seed;
      if (fuzz_budget) cfg.budget = *fuzz_budget;
      const auto summary = run_campaign(cfg, fuzz_out);
      out << summary.to_json().dump(2) << "\n";
      out << summary_table(load_reports(fuzz_out));
      return summary.bucket_keys.empty() ? kExitOk : kExitBugs;
    }

    if (*report) {
      out << summary_table(load_reports(report_dir));
      return kExitOk;
    }

    if (*replay_cmd) {
      ReplayOptions options;
      if (auto hosts = load_hosts(replay_hosts)) options.origins = origins_from(*hosts);
      for (const auto& pair : replay_host_pairs) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos) throw Error(Errc::kConfigError, "--host expects nf=host:port");
        auto value = pair.substr(eq + 1);
        if (value.find("://") == std::string::npos) value = "http://" + value;
        options.origins[pair.substr(0, eq)] = value;
      }
      if (!replay_token.empty()) options.token_endpoint = replay_token;
      const auto outcome = replay_file(replay_path, options);
      out << outcome.message << "\n";
      return outcome.reproduced ? kExitBugs : kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::kConfigError ? kExitUsage : kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace sbifuzz
