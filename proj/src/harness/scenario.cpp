#include "edgedist/scenario.hpp"

#include <toml.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace edgedist::harness {
namespace {
//---------------------------------------------------------------------------
class Reader {
 public:
   explicit Reader(std::string source) : source_(std::move(source)) {}

   [[noreturn]] void error(const std::string& what) const { throw SetupError(source_ + ": " + what); }

   template <class T>
   T required(const toml::node_view<const toml::node>& node, const std::string& key) const {
      auto v = node[key].value<T>();
      if (!v)
         error("'" + key + "' is missing or has the wrong type");
      return *v;
   }

   template <class T>
   std::optional<T> optional(const toml::node_view<const toml::node>& node, const std::string& key) const {
      if (!node[key])
         return std::nullopt;
      auto v = node[key].value<T>();
      if (!v)
         error("'" + key + "' has the wrong type");
      return v;
   }

   std::uint64_t id(const toml::node_view<const toml::node>& node, const std::string& key) const {
      auto v = required<std::int64_t>(node, key);
      if (v < 0)
         error("'" + key + "' must be non-negative");
      return static_cast<std::uint64_t>(v);
   }

   std::vector<double> reals(const toml::node_view<const toml::node>& node, const std::string& key) const {
      const auto* arr = node[key].as_array();
      if (!arr)
         error("'" + key + "' must be an array");
      std::vector<double> out;
      for (const auto& x : *arr) {
         auto v = x.value<double>();
         if (!v)
            error("'" + key + "' must hold numbers");
         out.push_back(*v);
      }
      return out;
   }

   const toml::array* tables(const toml::table& doc, const std::string& key) const {
      const auto* node = doc.get(key);
      if (!node)
         return nullptr;
      const auto* arr = node->as_array();
      if (!arr || !arr->is_array_of_tables())
         error("'" + key + "' must be an array of tables ([[" + key + "]])");
      return arr;
   }

 private:
   std::string source_;
};
//---------------------------------------------------------------------------
} // namespace
//---------------------------------------------------------------------------
std::string_view to_string(Mode mode) {
   return mode == Mode::Sockets ? "sockets" : "inproc";
}
//---------------------------------------------------------------------------
std::optional<Mode> parse_mode(std::string_view text) {
   if (text == "sockets")
      return Mode::Sockets;
   if (text == "inproc" || text == "in-process")
      return Mode::InProcess;
   return std::nullopt;
}
//---------------------------------------------------------------------------
const NodeSpec& Scenario::node(NodeId id) const {
   for (const auto& n : nodes)
      if (n.id == id)
         return n;
   throw SetupError("scenario has no node " + std::to_string(id));
}
//---------------------------------------------------------------------------
void Scenario::validate() const {
   auto fail = [&](const std::string& why) { throw SetupError(name + ": " + why); };
   if (!(time_scale > 0.0))
      fail("time_scale must be positive");
   if (strategies.empty())
      fail("no strategies");
   if (nodes.empty())
      fail("no nodes");
   std::set<NodeId> ids;
   for (const auto& n : nodes) {
      if (!ids.insert(n.id).second)
         fail("duplicate node id " + std::to_string(n.id));
      try {
         sim::NodeProfile{n.id, n.perf, n.noise_cv, 0}.validate(catalog);
      } catch (const InvalidArgument& e) {
         fail(e.what());
      }
   }
   if (!ids.contains(gateway))
      fail("gateway " + std::to_string(gateway) + " is not a node");
   std::set<RequestId> request_ids;
   for (const auto& r : requests) {
      if (!request_ids.insert(r.id).second)
         fail("duplicate request id " + std::to_string(r.id));
      try {
         r.validate(catalog);
      } catch (const InvalidArgument& e) {
         fail("request " + std::to_string(r.id) + ": " + e.what());
      }
   }
   std::set<NodeId> dropped;
   for (const auto& e : events) {
      if (!ids.contains(e.node))
         fail("event targets unknown node " + std::to_string(e.node));
      if (e.node == gateway)
         fail("the gateway cannot be disconnected");
      if (!dropped.insert(e.node).second)
         fail("node " + std::to_string(e.node) + " is disconnected twice");
      if (e.after_request.has_value() == e.request.has_value())
         fail("a disconnect needs exactly one of after_request or request");
      RequestId target = e.after_request ? *e.after_request : *e.request;
      if (!request_ids.contains(target))
         fail("event refers to unknown request " + std::to_string(target));
      if (e.request && !(e.at_fraction > 0.0 && e.at_fraction < 1.0))
         fail("at_fraction must lie in (0,1)");
   }
}
//---------------------------------------------------------------------------
Scenario parse_scenario(std::string_view text, const std::string& source) {
   Reader in(source);
   toml::table doc;
   try {
      doc = toml::parse(text, source);
   } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << e.description() << " at line " << e.source().begin.line;
      in.error(msg.str());
   }
   toml::node_view<const toml::node> root{static_cast<const toml::node&>(doc)};

   Scenario s;
   s.name = in.optional<std::string>(root, "name").value_or(source);
   s.seed = in.id(root, "seed");
   if (auto mode = in.optional<std::string>(root, "mode")) {
      auto m = parse_mode(*mode);
      if (!m)
         in.error("mode must be 'inproc' or 'sockets'");
      s.mode = *m;
   }
   s.time_scale = in.optional<double>(root, "time_scale").value_or(s.time_scale);
   if (auto check = in.optional<std::string>(root, "accuracy_check")) {
      if (*check == "delivered")
         s.accuracy_check = AccuracyCheck::Delivered;
      else if (*check == "empirical")
         s.accuracy_check = AccuracyCheck::Empirical;
      else
         in.error("accuracy_check must be 'delivered' or 'empirical'");
   }
   if (auto catalog = in.optional<std::string>(root, "catalog"); catalog && *catalog != "default")
      in.error("unknown catalog '" + *catalog + "'");

   const auto* strategies = root["strategies"].as_array();
   if (!strategies)
      in.error("'strategies' must be an array");
   for (const auto& x : *strategies) {
      auto name = x.value<std::string>();
      auto strategy = name ? policy::parse_strategy(*name) : std::nullopt;
      if (!strategy)
         in.error("unknown strategy");
      s.strategies.push_back(*strategy);
   }
   s.gateway = static_cast<NodeId>(in.id(root, "gateway"));

   if (const auto* nodes = in.tables(doc, "nodes"))
      for (const auto& n : *nodes) {
         toml::node_view<const toml::node> v{n};
         NodeSpec spec;
         spec.id = static_cast<NodeId>(in.id(v, "id"));
         spec.name = in.optional<std::string>(v, "name").value_or("node" + std::to_string(spec.id));
         spec.perf = in.reals(v, "perf");
         spec.noise_cv = in.optional<double>(v, "noise_cv").value_or(sim::kDefaultNoiseCv);
         s.nodes.push_back(std::move(spec));
      }
   if (const auto* requests = in.tables(doc, "requests"))
      for (const auto& r : *requests) {
         toml::node_view<const toml::node> v{r};
         InferenceRequest req;
         req.id = in.id(v, "id");
         req.batch_size = in.required<std::int64_t>(v, "batch");
         req.perf_req = in.required<double>(v, "perf_req");
         req.acc_req = in.required<double>(v, "acc_req");
         s.requests.push_back(req);
      }
   if (const auto* events = in.tables(doc, "events"))
      for (const auto& e : *events) {
         toml::node_view<const toml::node> v{e};
         if (in.required<std::string>(v, "kind") != "disconnect")
            in.error("unknown event kind");
         DisconnectEvent ev;
         ev.node = static_cast<NodeId>(in.id(v, "node"));
         if (v["after_request"])
            ev.after_request = in.id(v, "after_request");
         if (v["request"]) {
            ev.request = in.id(v, "request");
            ev.at_fraction = in.required<double>(v, "at_fraction");
         }
         s.events.push_back(ev);
      }
   s.validate();
   return s;
}
//---------------------------------------------------------------------------
Scenario load_scenario(const std::filesystem::path& path) {
   std::ifstream in(path);
   if (!in)
      throw SetupError("cannot open scenario " + path.string());
   std::stringstream text;
   text << in.rdbuf();
   return parse_scenario(text.str(), path.string());
}
//---------------------------------------------------------------------------
} // namespace edgedist::harness
