// Command line front end: one subcommand per scenario family.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "nlsctl/config.hpp"
#include "nlsctl/scenario.hpp"

namespace {

void report(const nlsctl::RunRecord& r) {
  std::cout << r.scenario << " -> " << r.out_dir << "\n";
  for (const auto& c : r.checks)
    std::cout << "  " << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
  if (!r.failure.empty()) std::cout << "  FAIL stage: " << r.failure << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controlled mass-critical NLS simulations"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  // Subcommand name and the scenario kinds it accepts; the first is the default.
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"ground-state", {"ground_state"}},
      {"profile", {"profile"}},
      {"evolve", {"free_blowup", "subcritical_global"}},
      {"stabilize", {"stabilize_global", "stabilize_then_null"}},
      {"open-loop", {"open_loop_null"}},
      {"hum-linear", {"hum_linear"}},
      {"hum-nonlinear", {"hum_nonlinear"}},
      {"sweep", {"sweep"}},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, kinds] : commands) {
    CLI::App* s = app.add_subcommand(name, "run a " + kinds.front() + " scenario");
    s->add_option("--config", config_path, "scenario configuration file")->required();
    s->add_option("--out", out_dir, "output directory");
    s->add_option("--seed", seed, "random seed")->each([&](const std::string&) { seed_given = true; });
    s->add_option("--threads", threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
    subs[name] = s;
  }
  CLI11_PARSE(app, argc, argv);

  try {
    nlsctl::Config cfg = nlsctl::Config::load(config_path);
    std::string cmd;
    for (const auto& [name, kinds] : commands)
      if (subs[name]->parsed()) cmd = name;
    const auto& kinds =
        std::find_if(commands.begin(), commands.end(), [&](const auto& c) { return c.first == cmd; })->second;
    if (!cfg.has("scenario.kind")) cfg.set("scenario.kind", kinds.front());
    std::string kind = cfg.get_string("scenario.kind");
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
      throw nlsctl::ConfigError("scenario.kind '" + kind + "' does not belong to '" + cmd + "'");
    if (!seed_given) seed = static_cast<std::uint64_t>(cfg.get_int("scenario.seed", 0));

    bool ok = true;
    if (kind == "sweep") {
      nlsctl::SweepResult res = nlsctl::run_sweep(cfg, out_dir, seed, threads);
      for (const auto& r : res.runs) report(r);
      report(res.aggregate);
      ok = res.aggregate.passed();
    } else {
      nlsctl::RunRecord r = nlsctl::run_scenario(cfg, out_dir, seed);
      report(r);
      ok = r.passed();
    }
    std::cout << (ok ? "all checks passed" : "checks failed") << "\n";
    return ok ? 0 : 1;
  } catch (const nlsctl::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
