#include "edgedist/harness.hpp"
#include "edgedist/worker.hpp"

#include <fmt/format.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <map>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

extern char** environ;

namespace edgedist::harness {
namespace {
//---------------------------------------------------------------------------
sim::NodeProfile profile_of(const NodeSpec& spec, std::uint64_t seed) {
   return sim::NodeProfile{spec.id, spec.perf, spec.noise_cv, sim::derive_seed({seed, spec.id})};
}
//---------------------------------------------------------------------------
std::optional<sim::FaultPlan> fault_for(const Scenario& s, NodeId node) {
   for (const auto& e : s.events)
      if (e.node == node && e.request)
         return sim::FaultPlan{*e.request, e.at_fraction};
   return std::nullopt;
}
//---------------------------------------------------------------------------
class Cluster {
 public:
   virtual ~Cluster() = default;
   /// Makes `node` leave the cluster.
   virtual void disconnect(NodeId node) = 0;
};
//---------------------------------------------------------------------------
class InProcessCluster final : public Cluster {
 public:
   InProcessCluster(const Scenario& s, std::uint64_t seed, GatewayRuntime& gateway) {
      for (const auto& spec : s.nodes) {
         if (spec.id == s.gateway)
            continue;
         auto [gw_end, node_end] = proto::make_pipe_pair();
         sim::WorkerOptions options;
         options.time_scale = s.time_scale;
         options.fault = fault_for(s, spec.id);
         auto worker = std::make_unique<sim::WorkerRuntime>(profile_of(spec, seed), s.catalog, std::move(node_end), options);
         gateway.add_connection(std::move(gw_end));
         worker->start();
         workers_[spec.id] = std::move(worker);
      }
   }

   void disconnect(NodeId node) override { workers_.at(node)->stop(); }

 private:
   std::map<NodeId, std::unique_ptr<sim::WorkerRuntime>> workers_;
};
//---------------------------------------------------------------------------
class SocketCluster final : public Cluster {
 public:
   SocketCluster(const Scenario& s, std::uint64_t seed, GatewayRuntime& gateway, const std::filesystem::path& worker, std::chrono::milliseconds timeout)
      : listener_("127.0.0.1", 0) {
      try {
         launch(s, seed, gateway, worker, timeout);
      } catch (...) {
         terminate_all();
         throw;
      }
   }

   ~SocketCluster() override { terminate_all(); }

   void disconnect(NodeId node) override {
      auto it = pids_.find(node);
      if (it == pids_.end())
         return;
      ::kill(it->second, SIGTERM);
      int status = 0;
      ::waitpid(it->second, &status, 0);
      pids_.erase(it);
   }

 private:
   void launch(const Scenario& s, std::uint64_t seed, GatewayRuntime& gateway, const std::filesystem::path& worker, std::chrono::milliseconds timeout) {
      static std::atomic<int> counter{0};
      dir_ = std::filesystem::temp_directory_path() / fmt::format("edgedist-{}-{}", ::getpid(), counter++);
      std::filesystem::create_directories(dir_);
      if (!std::filesystem::exists(worker))
         throw SetupError("worker binary not found: " + worker.string());

      std::size_t expected = 0;
      for (const auto& spec : s.nodes) {
         if (spec.id == s.gateway)
            continue;
         auto profile = profile_of(spec, seed);
         auto file = dir_ / fmt::format("node{}.toml", spec.id);
         sim::write_profile_file(file, profile);
         std::vector<std::string> args{worker.string(),
                                       "--node-id",
                                       std::to_string(spec.id),
                                       "--gateway-addr",
                                       fmt::format("127.0.0.1:{}", listener_.port()),
                                       "--profile-file",
                                       file.string(),
                                       "--seed",
                                       std::to_string(profile.rng_seed),
                                       "--time-scale",
                                       fmt::format("{}", s.time_scale)};
         if (auto fault = fault_for(s, spec.id)) {
            args.insert(args.end(), {"--fail-request", std::to_string(fault->request), "--fail-fraction", fmt::format("{}", fault->fraction)});
         }
         pids_[spec.id] = spawn(args);
         ++expected;
      }
      auto deadline = std::chrono::steady_clock::now() + timeout;
      for (std::size_t accepted = 0; accepted < expected;) {
         if (std::chrono::steady_clock::now() >= deadline)
            throw SetupError(fmt::format("only {} of {} workers connected", accepted, expected));
         for (const auto& [node, pid] : pids_) {
            int status = 0;
            if (::waitpid(pid, &status, WNOHANG) == pid) {
               pids_.erase(node);
               throw SetupError(fmt::format("worker {} exited during start-up (status {})", node, status));
            }
         }
         if (auto t = listener_.accept(std::chrono::milliseconds(100))) {
            gateway.add_connection(std::move(t));
            ++accepted;
         }
      }
   }

   void terminate_all() {
      for (const auto& [node, pid] : pids_)
         ::kill(pid, SIGTERM);
      for (const auto& [node, pid] : pids_) {
         int status = 0;
         ::waitpid(pid, &status, 0);
      }
      pids_.clear();
      std::error_code ignored;
      if (!dir_.empty())
         std::filesystem::remove_all(dir_, ignored);
   }

   static pid_t spawn(const std::vector<std::string>& args) {
      std::vector<char*> argv;
      for (const auto& a : args)
         argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      pid_t pid = 0;
      int rc = ::posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ);
      if (rc != 0)
         throw SetupError(fmt::format("cannot start {}: {}", args[0], std::strerror(rc)));
      return pid;
   }

   proto::TcpListener listener_;
   std::filesystem::path dir_;
   std::map<NodeId, pid_t> pids_;
};
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
std::filesystem::path default_worker_binary() {
   if (const char* env = std::getenv("EDGEDIST_WORKER"))
      return env;
#ifdef EDGEDIST_WORKER_PATH
   if (std::filesystem::exists(EDGEDIST_WORKER_PATH))
      return EDGEDIST_WORKER_PATH;
#endif
   std::error_code ec;
   auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
   return ec ? std::filesystem::path("edgedist-worker") : self.parent_path() / "edgedist-worker";
}
//---------------------------------------------------------------------------
StrategyRun run_strategy(const Scenario& scenario, policy::Strategy strategy, const RunOptions& options) {
   scenario.validate();
   std::uint64_t seed = options.seed.value_or(scenario.seed);
   Mode mode = options.mode.value_or(scenario.mode);

   // Workers that drop mid-request do so a fixed fraction into their first
   // assignment of that request; the ledger is told the matching moment.
   std::map<NodeId, sim::NodeProfile> profiles;
   for (const auto& spec : scenario.nodes)
      profiles.emplace(spec.id, profile_of(spec, seed));
   GatewayConfig config;
   config.self = profiles.at(scenario.gateway);
   config.catalog = scenario.catalog;
   config.strategy = strategy;
   config.seed = seed;
   config.time_scale = scenario.time_scale;
   config.accuracy_check = scenario.accuracy_check;
   config.disconnect_clock = [&scenario, profiles](NodeId node, RequestId request, const AssignmentRecord& open) -> std::optional<double> {
      auto fault = fault_for(scenario, node);
      if (!fault || fault->request != request)
         return std::nullopt;
      auto r = sim::run_inference(profiles.at(node), scenario.catalog, request, open.images, open.level, open.seed);
      return open.issued_at + fault->fraction * static_cast<double>(r.elapsed_ms) / 1000.0;
   };
   if (options.trace)
      config.trace = [&options, name = std::string(policy::to_string(strategy))](const std::string& line) { options.trace(name + ": " + line); };

   GatewayRuntime gateway(config);
   std::unique_ptr<Cluster> cluster;
   try {
      if (mode == Mode::Sockets) {
         auto worker = options.worker_binary.empty() ? default_worker_binary() : options.worker_binary;
         cluster = std::make_unique<SocketCluster>(scenario, seed, gateway, worker, options.setup_timeout);
      } else {
         cluster = std::make_unique<InProcessCluster>(scenario, seed, gateway);
      }
   } catch (const proto::TransportError& e) {
      throw SetupError(e.what());
   } catch (const InvalidArgument& e) {
      throw SetupError(e.what());
   }
   gateway.start();
   std::vector<NodeId> everyone;
   for (const auto& spec : scenario.nodes)
      everyone.push_back(spec.id);
   if (!gateway.wait_for_members(everyone, options.setup_timeout))
      throw SetupError("not every node reported its profile in time");

   StrategyRun run;
   run.strategy = strategy;
   run.requests = scenario.requests;
   std::vector<CompletedRequest> done;
   for (std::size_t i = 0; i < scenario.requests.size(); ++i) {
      gateway.submit(scenario.requests[i]);
      std::vector<NodeId> leaving;
      for (const auto& e : scenario.events)
         if (e.after_request == scenario.requests[i].id)
            leaving.push_back(e.node);
      if (leaving.empty() && i + 1 < scenario.requests.size())
         continue;
      done = gateway.wait_completed(i + 1, options.request_timeout);
      for (NodeId node : leaving) {
         cluster->disconnect(node);
         auto remaining = gateway.members();
         std::erase(remaining, node);
         if (!gateway.wait_for_members(remaining, options.request_timeout))
            throw RuntimeError(fmt::format("node {} did not leave the cluster", node));
      }
   }
   for (auto& c : done) {
      run.outcomes.push_back(c.outcome);
      run.audits.push_back(std::move(c.audit));
   }
   gateway.stop();
   cluster.reset();
   return run;
}
//---------------------------------------------------------------------------
Report run_scenario(const Scenario& scenario, const RunOptions& options) {
   Report report;
   report.scenario = scenario.name;
   report.accuracy_check = scenario.accuracy_check;
   for (auto strategy : scenario.strategies)
      report.runs.push_back(run_strategy(scenario, strategy, options));
   return report;
}
//---------------------------------------------------------------------------
} // namespace edgedist::harness
