// Local node process: connects to the gateway, profiles itself and serves
// assignments until the link goes away.
#include "edgedist/simnode.hpp"
#include "edgedist/transport.hpp"
#include "edgedist/worker.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace edgedist;

int main(int argc, char** argv) {
   CLI::App app{"edgedist local node"};
   NodeId node_id = 0;
   std::string gateway;
   std::string profile_file;
   std::uint64_t seed = 0;
   double time_scale = 1.0;
   std::optional<RequestId> fail_request;
   double fail_fraction = 0.5;
   app.add_option("--node-id", node_id, "static node id")->required();
   app.add_option("--gateway-addr", gateway, "host:port of the gateway")->required();
   app.add_option("--profile-file", profile_file, "TOML file with perf = [...] and noise_cv")->required()->check(CLI::ExistingFile);
   app.add_option("--seed", seed, "calibration seed");
   app.add_option("--time-scale", time_scale, "simulated seconds per wall-clock second")->check(CLI::PositiveNumber);
   app.add_option("--fail-request", fail_request, "drop the link during this request (testing)");
   app.add_option("--fail-fraction", fail_fraction, "how far into the assignment to drop")->check(CLI::Range(0.0, 1.0));
   CLI11_PARSE(app, argc, argv);

   try {
      auto profile = sim::load_profile_file(profile_file, node_id, seed);
      auto [host, port] = proto::parse_address(gateway);
      auto link = proto::connect_tcp(host, port, std::chrono::seconds(10));
      sim::WorkerOptions options;
      options.time_scale = time_scale;
      if (fail_request)
         options.fault = sim::FaultPlan{*fail_request, fail_fraction};
      sim::WorkerRuntime worker(profile, default_catalog(), std::move(link), options);
      worker.start();
      worker.wait();
      if (auto error = worker.error(); !error.empty()) {
         std::cerr << "node " << node_id << ": " << error << "\n";
         return 3;
      }
   } catch (const proto::TransportError& e) {
      std::cerr << "node " << node_id << ": " << e.what() << "\n";
      return 2;
   } catch (const InvalidArgument& e) {
      std::cerr << "node " << node_id << ": " << e.what() << "\n";
      return 2;
   }
   return 0;
}
