#include "edgedist/core.hpp"

#include "edgedist/catalog_constants.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace edgedist {
//---------------------------------------------------------------------------
ModelCatalog::ModelCatalog(std::vector<ModelVariant> levels) : levels_(std::move(levels)) {
   if (levels_.empty())
      throw InvalidArgument("model catalog needs at least one level");
   for (std::size_t i = 0; i < levels_.size(); ++i) {
      const auto& v = levels_[i];
      if (v.level != static_cast<int>(i))
         throw InvalidArgument("catalog level indices must be 0..m-1 in order");
      if (!(v.top5_accuracy > 0.0 && v.top5_accuracy <= 1.0))
         throw InvalidArgument("catalog accuracy must lie in (0, 1]");
      if (!(v.alpha > 0.0) || !std::isfinite(v.alpha))
         throw InvalidArgument("catalog alpha must be positive");
      if (i > 0) {
         if (!(v.top5_accuracy < levels_[i - 1].top5_accuracy))
            throw InvalidArgument("catalog accuracies must strictly decrease with level");
         if (!(v.alpha < levels_[i - 1].alpha))
            throw InvalidArgument("catalog alphas must strictly decrease with level");
      }
   }
}
//---------------------------------------------------------------------------
ModelCatalog ModelCatalog::from_columns(std::span<const double> alphas, std::span<const double> accuracies) {
   if (alphas.size() != accuracies.size())
      throw InvalidArgument("alpha and accuracy lists differ in length");
   std::vector<ModelVariant> levels;
   for (std::size_t i = 0; i < alphas.size(); ++i)
      levels.push_back({static_cast<int>(i), alphas[i], accuracies[i]});
   return ModelCatalog(std::move(levels));
}
//---------------------------------------------------------------------------
const ModelVariant& ModelCatalog::at(int level) const {
   if (!contains(level))
      throw InvalidArgument("approximation level " + std::to_string(level) + " outside catalog");
   return levels_[static_cast<std::size_t>(level)];
}
//---------------------------------------------------------------------------
ModelCatalog ModelCatalog::truncated(std::size_t count) const {
   if (count == 0 || count > levels_.size())
      throw InvalidArgument("cannot truncate catalog to " + std::to_string(count) + " levels");
   return ModelCatalog({levels_.begin(), levels_.begin() + static_cast<std::ptrdiff_t>(count)});
}
//---------------------------------------------------------------------------
ModelCatalog default_catalog() {
   return ModelCatalog::from_columns(constants::kDefaultAlphas, constants::kDefaultTop5);
}
//---------------------------------------------------------------------------
double snap_perf(double value) {
   return std::round(value / constants::kPerfResolution) * constants::kPerfResolution;
}
//---------------------------------------------------------------------------
bool meets(double achieved, double required) {
   return achieved >= required - 1e-9 * std::max(1.0, std::abs(required));
}
//---------------------------------------------------------------------------
ProfilingTable::ProfilingTable(ModelCatalog catalog, std::vector<NodeId> node_ids, const std::vector<std::vector<double>>& perf)
   : catalog_(std::move(catalog)), node_ids_(std::move(node_ids)) {
   if (node_ids_.empty())
      throw InvalidArgument("profiling table needs at least one node");
   if (std::set<NodeId>(node_ids_.begin(), node_ids_.end()).size() != node_ids_.size())
      throw InvalidArgument("profiling table node ids must be unique");
   if (perf.size() != catalog_.size())
      throw InvalidArgument("profiling table has " + std::to_string(perf.size()) + " rows, catalog has " + std::to_string(catalog_.size()) + " levels");
   const std::size_t n = node_ids_.size();
   perf_.reserve(perf.size() * n);
   for (const auto& row : perf) {
      if (row.size() != n)
         throw InvalidArgument("profiling table row width differs from node count");
      for (double v : row) {
         if (!std::isfinite(v) || !(v > 0.0))
            throw InvalidArgument("profiling table entries must be finite and positive");
         double snapped = snap_perf(v);
         if (!(snapped > 0.0))
            throw InvalidArgument("profiling table entry below grid resolution");
         perf_.push_back(snapped);
      }
   }
   for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t l = 1; l < perf.size(); ++l) {
         if (perf_[l * n + c] < perf_[(l - 1) * n + c]) {
            std::ostringstream msg;
            msg << "node " << node_ids_[c] << " slows down at level " << l << "; columns must be non-decreasing";
            throw InvalidArgument(msg.str());
         }
      }
   }
}
//---------------------------------------------------------------------------
double ProfilingTable::level_total(int level) const {
   double total = 0.0;
   for (std::size_t c = 0; c < nodes(); ++c)
      total += perf(level, c);
   return total;
}
//---------------------------------------------------------------------------
std::vector<double> ProfilingTable::column(std::size_t column) const {
   std::vector<double> out;
   for (std::size_t l = 0; l < levels(); ++l)
      out.push_back(perf(static_cast<int>(l), column));
   return out;
}
//---------------------------------------------------------------------------
std::vector<double> ProfilingTable::row(int level) const {
   std::vector<double> out;
   for (std::size_t c = 0; c < nodes(); ++c)
      out.push_back(perf(level, c));
   return out;
}
//---------------------------------------------------------------------------
std::size_t ProfilingTable::column_of(NodeId node) const {
   auto it = std::find(node_ids_.begin(), node_ids_.end(), node);
   if (it == node_ids_.end())
      throw InvalidArgument("node " + std::to_string(node) + " is not in the profiling table");
   return static_cast<std::size_t>(it - node_ids_.begin());
}
//---------------------------------------------------------------------------
bool ProfilingTable::has_node(NodeId node) const {
   return std::find(node_ids_.begin(), node_ids_.end(), node) != node_ids_.end();
}
//---------------------------------------------------------------------------
ProfilingTable ProfilingTable::restricted(std::span<const NodeId> nodes) const {
   std::vector<std::vector<double>> rows(levels());
   for (NodeId node : nodes) {
      std::size_t c = column_of(node);
      for (std::size_t l = 0; l < levels(); ++l)
         rows[l].push_back(perf(static_cast<int>(l), c));
   }
   return ProfilingTable(catalog_, {nodes.begin(), nodes.end()}, rows);
}
//---------------------------------------------------------------------------
ProfilingTable ProfilingTable::with_levels(std::size_t count) const {
   std::vector<std::vector<double>> rows;
   for (std::size_t l = 0; l < count && l < levels(); ++l)
      rows.push_back(row(static_cast<int>(l)));
   return ProfilingTable(catalog_.truncated(count), node_ids_, rows);
}
//---------------------------------------------------------------------------
void InferenceRequest::validate(const ModelCatalog& catalog) const {
   if (batch_size < 1)
      throw InvalidArgument("request batch size must be at least 1");
   if (!(perf_req > 0.0) || !std::isfinite(perf_req))
      throw InvalidArgument("request performance requirement must be positive");
   if (!(acc_req > 0.0) || acc_req > catalog.max_accuracy())
      throw InvalidArgument("request accuracy requirement must lie in (0, max catalog accuracy]");
}
//---------------------------------------------------------------------------
std::int64_t Assignment::total_images() const {
   std::int64_t total = 0;
   for (const auto& s : shares)
      total += s.images;
   return total;
}
//---------------------------------------------------------------------------
const NodeShare* Assignment::share_of(NodeId node) const {
   for (const auto& s : shares)
      if (s.node == node)
         return &s;
   return nullptr;
}
//---------------------------------------------------------------------------
void validate_assignment(const Assignment& assignment, std::int64_t batch_size, const ModelCatalog& catalog) {
   for (const auto& s : assignment.shares) {
      if (s.images < 0)
         throw InvalidArgument("assignment share has negative image count");
      if (!catalog.contains(s.level))
         throw InvalidArgument("assignment uses unknown level " + std::to_string(s.level));
   }
   if (assignment.total_images() != batch_size)
      throw InvalidArgument("assignment covers " + std::to_string(assignment.total_images()) + " images, request has " + std::to_string(batch_size));
}
//---------------------------------------------------------------------------
double weighted_accuracy(const Assignment& assignment, const ModelCatalog& catalog) {
   std::int64_t total = assignment.total_images();
   if (total <= 0)
      throw InvalidArgument("weighted accuracy is undefined for an empty assignment");
   double sum = 0.0;
   for (const auto& s : assignment.shares)
      sum += static_cast<double>(s.images) * catalog.accuracy(s.level);
   return sum / static_cast<double>(total);
}
//---------------------------------------------------------------------------
void finalize_outcome(RequestOutcome& outcome) {
   std::int64_t correct = 0;
   double makespan = 0.0;
   for (const auto& n : outcome.per_node) {
      correct += n.correct;
      makespan = std::max(makespan, n.elapsed);
   }
   outcome.makespan = makespan;
   outcome.achieved_throughput = makespan > 0.0 ? static_cast<double>(outcome.batch_size) / makespan : 0.0;
   outcome.empirical_top5 = outcome.batch_size > 0 ? static_cast<double>(correct) / static_cast<double>(outcome.batch_size) : 0.0;
}
//---------------------------------------------------------------------------
std::vector<std::int64_t> apportion(std::int64_t total, std::span<const double> weights) {
   if (weights.empty())
      throw InvalidArgument("cannot apportion over zero parts");
   if (total < 0)
      throw InvalidArgument("cannot apportion a negative total");
   double sum = 0.0;
   for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w))
         throw InvalidArgument("apportionment weights must be finite and non-negative");
      sum += w;
   }
   if (!(sum > 0.0))
      throw InvalidArgument("apportionment weights sum to zero");

   std::vector<std::int64_t> out(weights.size());
   std::vector<double> remainder(weights.size());
   std::int64_t assigned = 0;
   for (std::size_t i = 0; i < weights.size(); ++i) {
      double quota = static_cast<double>(total) * weights[i] / sum;
      double whole = std::floor(quota);
      out[i] = static_cast<std::int64_t>(whole);
      remainder[i] = quota - whole;
      assigned += out[i];
   }
   std::vector<std::size_t> order(weights.size());
   std::iota(order.begin(), order.end(), 0);
   std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
   // floating error can push the floor sum one off either way
   for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
      ++out[order[k]];
      ++assigned;
   }
   for (std::size_t k = order.size(); assigned > total;) {
      k = (k == 0 ? order.size() : k) - 1;
      if (out[order[k]] > 0) {
         --out[order[k]];
         --assigned;
      }
   }
   return out;
}
//---------------------------------------------------------------------------
std::vector<std::int64_t> split_evenly(std::int64_t total, std::size_t parts) {
   if (parts == 0)
      throw InvalidArgument("cannot split over zero parts");
   std::vector<std::int64_t> out(parts, total / static_cast<std::int64_t>(parts));
   auto extra = static_cast<std::size_t>(total % static_cast<std::int64_t>(parts));
   for (std::size_t i = 0; i < extra; ++i)
      ++out[i];
   return out;
}
//---------------------------------------------------------------------------
} // namespace edgedist
