#include "edgedist/harness.hpp"
#include "edgedist/policy_fuzz.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <iostream>

using namespace edgedist;
using namespace edgedist::harness;

namespace {

constexpr int kSetupFailure = 2;
constexpr int kRuntimeFailure = 3;

std::optional<Mode> mode_flag(const std::string& text) {
   if (text.empty())
      return std::nullopt;
   auto mode = parse_mode(text);
   if (!mode)
      throw SetupError("--mode must be sockets or inproc");
   return mode;
}

int guarded(const std::function<int()>& body) {
   try {
      return body();
   } catch (const SetupError& e) {
      std::cerr << "setup error: " << e.what() << "\n";
      return kSetupFailure;
   } catch (const RuntimeError& e) {
      std::cerr << "runtime error: " << e.what() << "\n";
      return kRuntimeFailure;
   } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kRuntimeFailure;
   }
}

int oracle_check(std::size_t nodes, std::size_t levels, std::size_t cases, std::uint64_t seed) {
   std::vector<std::size_t> ns{1, 2, 3, 4}, ms{1, 2, 3, 4, 5, 6};
   if (nodes)
      ns = {nodes};
   if (levels)
      ms = {levels};
   auto start = std::chrono::steady_clock::now();
   std::size_t total = 0, agreed = 0;
   for (auto n : ns)
      for (auto m : ms) {
         auto stats = policy::check_oracle_agreement(n, m, cases, seed + 1000 * n + m);
         total += stats.cases;
         agreed += stats.agreed;
         fmt::print("n={} m={} cases={} agreed={} infeasible={}{}\n", n, m, stats.cases, stats.agreed, stats.infeasible,
                    stats.first_mismatch.empty() ? "" : "  first mismatch: " + stats.first_mismatch);
      }
   double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
   fmt::print("agreement {}/{} ({:.2f}%) in {:.2f} s\n", agreed, total, total ? 100.0 * static_cast<double>(agreed) / static_cast<double>(total) : 100.0, seconds);
   return agreed == total ? 0 : kRuntimeFailure;
}

} // namespace

int main(int argc, char** argv) {
   CLI::App app{"edgedist: collaborative edge-inference orchestrator"};
   app.require_subcommand(1);

   std::string scenario_path, mode_text, out_path;
   std::optional<std::uint64_t> seed;
   auto* run = app.add_subcommand("run", "run a scenario and report per-request outcomes");
   run->add_option("scenario", scenario_path, "scenario TOML file")->required()->check(CLI::ExistingFile);
   run->add_option("--mode", mode_text, "sockets or inproc (overrides the scenario)");
   run->add_option("--seed", seed, "override the scenario seed");
   run->add_option("--out", out_path, "write the CSV report here instead of stdout");

   std::size_t nodes = 0, levels = 0, cases = 1000;
   std::uint64_t oracle_seed = 1;
   auto* oracle = app.add_subcommand("oracle-check", "compare the dispatch policy with exhaustive search");
   oracle->add_option("--nodes", nodes, "node count (default: 1..4)")->check(CLI::Range(1, 8));
   oracle->add_option("--levels", levels, "level count (default: 1..6)")->check(CLI::Range(1, 6));
   oracle->add_option("--cases", cases, "instances per (nodes, levels) cell");
   oracle->add_option("--seed", oracle_seed, "generator seed");

   std::string trace_path, trace_mode;
   auto* trace = app.add_subcommand("fsm-trace", "print every gateway state transition while running a scenario");
   trace->add_option("scenario", trace_path, "scenario TOML file")->required()->check(CLI::ExistingFile);
   trace->add_option("--mode", trace_mode, "sockets or inproc");

   CLI11_PARSE(app, argc, argv);

   if (*run)
      return guarded([&] {
         auto scenario = load_scenario(scenario_path);
         RunOptions options;
         options.mode = mode_flag(mode_text);
         options.seed = seed;
         auto report = run_scenario(scenario, options);
         if (out_path.empty()) {
            write_csv(report, std::cout);
            std::cerr << emit_summary(report);
         } else {
            emit_csv(report, out_path);
            std::cout << emit_summary(report);
         }
         return 0;
      });
   if (*oracle)
      return guarded([&] { return oracle_check(nodes, levels, cases, oracle_seed); });
   if (*trace)
      return guarded([&] {
         auto scenario = load_scenario(trace_path);
         RunOptions options;
         options.mode = mode_flag(trace_mode);
         options.trace = [](const std::string& line) { std::cout << line << "\n"; };
         auto report = run_scenario(scenario, options);
         std::cout << emit_summary(report);
         return 0;
      });
   return 0;
}
