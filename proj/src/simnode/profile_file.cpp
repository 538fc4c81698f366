#include "edgedist/simnode.hpp"

#include <toml.hpp>

#include <fstream>

namespace edgedist::sim {
//---------------------------------------------------------------------------
NodeProfile load_profile_file(const std::filesystem::path& path, NodeId node_id, std::uint64_t seed) {
   toml::table doc;
   try {
      doc = toml::parse_file(path.string());
   } catch (const toml::parse_error& e) {
      throw InvalidArgument(path.string() + ": " + std::string(e.description()));
   }
   NodeProfile p;
   p.node_id = node_id;
   p.rng_seed = seed;
   const auto* perf = doc["perf"].as_array();
   if (!perf)
      throw InvalidArgument(path.string() + ": missing array 'perf'");
   for (const auto& v : *perf) {
      auto x = v.value<double>();
      if (!x)
         throw InvalidArgument(path.string() + ": 'perf' must hold numbers");
      p.perf_per_level.push_back(*x);
   }
   p.noise_cv = doc["noise_cv"].value_or(kDefaultNoiseCv);
   return p;
}
//---------------------------------------------------------------------------
void write_profile_file(const std::filesystem::path& path, const NodeProfile& profile) {
   toml::array perf;
   for (double v : profile.perf_per_level)
      perf.push_back(v);
   toml::table doc{{"perf", perf}, {"noise_cv", profile.noise_cv}};
   std::ofstream out(path);
   out << doc << "\n";
   if (!out)
      throw InvalidArgument("cannot write " + path.string());
}
//---------------------------------------------------------------------------
} // namespace edgedist::sim
