// bolting_cli: run scenario specs headless or with a live gateway.
//
//   bolting_cli run <spec.json> [--batch N] [--seed S] [--variant V]... [--out DIR]
//                               [--serve] [--port P] [--rate-limit HZ] [--no-telemetry]
//   bolting_cli check <spec.json>
//   bolting_cli report <telemetry.jsonl> --spec <spec.json> [--variant V]
//
// `run` exits 0 iff every run matched the expected outcome its spec declares.

#include "bolting/scenario.hpp"

#ifdef BOLTING_HAVE_GATEWAY
#include "bolting/ws_server.hpp"
#endif

#include <CLI11.hpp>

#include <iostream>

using namespace bolting;

namespace {

std::vector<ScenarioSpec> load_all(const std::string& path, std::vector<std::string> variants) {
  if (variants.empty()) variants = spec_variants(path);
  std::vector<ScenarioSpec> specs;
  if (variants.empty()) specs.push_back(load_spec(path));
  for (const std::string& v : variants) specs.push_back(load_spec(path, v));
  return specs;
}

int cmd_run(const std::string& path, int batch, std::optional<std::uint64_t> seed,
            const std::vector<std::string>& variants, const std::string& out, bool serve,
            unsigned short port, double rate_limit, bool no_telemetry) {
  std::vector<ScenarioSpec> specs = load_all(path, variants);
  RunOptions opt;
  opt.out_dir = out;
  opt.rate_limit = rate_limit;
  opt.write_telemetry = !no_telemetry;

  std::vector<RunReport> runs;
  if (serve) {
#ifdef BOLTING_HAVE_GATEWAY
    if (specs.size() != 1 || batch != 1) {
      std::cerr << "--serve runs a single scenario; pick one --variant and no --batch\n";
      return 2;
    }
    ScenarioSpec s = specs.front();
    if (seed) s.seed = *seed;
    TelemetryBuffer telemetry;
    CommandQueue commands;
    WsServer server(port, telemetry, commands, hello_for(s, rate_limit),
                    [](const std::string& m) { std::cerr << "[gateway] " << m << '\n'; });
    std::cerr << "serving ws://127.0.0.1:" << server.port() << "/\n";
    opt.live = &telemetry;
    opt.commands = &commands;
    opt.realtime = true;
    runs.push_back(run_scenario(s, opt));
    server.stop();
#else
    std::cerr << "built without the gateway (BOLTING_BUILD_GATEWAY=OFF)\n";
    return 2;
#endif
  } else {
    const std::uint64_t base = seed ? *seed : specs.front().seed;
    BatchResult r = run_batch(specs, batch, base, opt);
    runs = std::move(r.runs);
    if (batch > 1 || runs.size() > 1) std::cout << r.summary_csv;
  }

  bool ok = true;
  for (const RunReport& r : runs) {
    ok = ok && r.expected_matched();
    if (runs.size() == 1) std::cout << r.to_json().dump(2) << '\n';
  }
  if (!ok) std::cerr << "expected outcome not matched\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bolting cell scenario runner"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, telemetry_path;
  int batch = 1;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> variants;
  bool serve = false, no_telemetry = false;
  unsigned short port = 8930;
  double rate_limit = 30.0;

  CLI::App* run = app.add_subcommand("run", "Run a scenario spec (all variants unless --variant)");
  run->add_option("spec", spec_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--batch", batch, "Runs per variant, seeds seed..seed+N-1")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Base seed (default: the spec's)");
  run->add_option("--variant", variants, "Variant to run (repeatable)");
  run->add_option("--out", out_dir, "Output directory for logs, reports and CSV");
  run->add_flag("--serve", serve, "Start the WebSocket gateway and run in real time");
  run->add_option("--port", port, "Gateway port for --serve");
  run->add_option("--rate-limit", rate_limit, "Live telemetry rate in Hz")->check(CLI::PositiveNumber);
  run->add_flag("--no-telemetry", no_telemetry, "Skip telemetry.jsonl (events and report only)");

  CLI::App* check = app.add_subcommand("check", "Load and validate a spec and its variants");
  check->add_option("spec", spec_path, "Scenario JSON")->required()->check(CLI::ExistingFile);

  CLI::App* report = app.add_subcommand("report", "Recompute a run report from its telemetry log");
  report->add_option("telemetry", telemetry_path, "telemetry.jsonl")->required()->check(CLI::ExistingFile);
  report->add_option("--spec", spec_path, "Scenario JSON the run used")->required();
  report->add_option("--variant", variants, "Variant the run used");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_run(spec_path, batch, seed, variants, out_dir, serve, port, rate_limit,
                     no_telemetry);
    }
    if (*check) {
      for (const ScenarioSpec& s : load_all(spec_path, {}))
        std::cout << s.name << (s.variant.empty() ? "" : " [" + s.variant + "]") << ": ok\n";
      return 0;
    }
    if (*report) {
      const ScenarioSpec s = load_spec(spec_path, variants.empty() ? "" : variants.front());
      RunReport r = report_from_log(telemetry_path, s.goal);
      r.scenario = s.name;
      r.variant = s.variant;
      r.expected = s.expected_outcome;
      std::cout << r.to_json().dump(2) << '\n';
      return 0;
    }
  } catch (const SpecError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
