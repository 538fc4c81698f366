#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgedist {

using NodeId = std::uint32_t;
using RequestId = std::uint64_t;

/// Raised when a domain value violates its construction invariants.
class InvalidArgument : public std::invalid_argument {
 public:
   using std::invalid_argument::invalid_argument;
};

struct ModelVariant {
   int level = 0;
   double alpha = 0.0;
   double top5_accuracy = 0.0;

   friend bool operator==(const ModelVariant&, const ModelVariant&) = default;
};

/// Ordered set of model variants. Level 0 is the most accurate, the last
/// level the most approximate (and fastest).
class ModelCatalog {
 public:
   /// Throws InvalidArgument unless accuracies and alphas are strictly
   /// decreasing, accuracies lie in (0,1] and the level indices are 0..m-1.
   explicit ModelCatalog(std::vector<ModelVariant> levels);

   /// Convenience constructor assigning level indices in order.
   static ModelCatalog from_columns(std::span<const double> alphas, std::span<const double> accuracies);

   std::size_t size() const { return levels_.size(); }
   int deepest_level() const { return static_cast<int>(levels_.size()) - 1; }
   bool contains(int level) const { return level >= 0 && level < static_cast<int>(levels_.size()); }
   const ModelVariant& at(int level) const;
   double accuracy(int level) const { return at(level).top5_accuracy; }
   double max_accuracy() const { return levels_.front().top5_accuracy; }
   const std::vector<ModelVariant>& levels() const { return levels_; }

   /// The first `count` levels, used when a cluster only ships a subset of models.
   ModelCatalog truncated(std::size_t count) const;

   friend bool operator==(const ModelCatalog&, const ModelCatalog&) = default;

 private:
   std::vector<ModelVariant> levels_;
};

/// Six MobileNetV2 widths, accuracies from catalog_constants.hpp.
ModelCatalog default_catalog();

/// Per-node throughput (inferences/sec) at every approximation level.
///
/// Values are snapped to a 0.01 inferences/sec grid on construction so that the
/// dispatch solver and its verification oracle operate on identical numbers.
/// Every column must be non-decreasing in the level index.
class ProfilingTable {
 public:
   /// `perf[level][column]`; throws InvalidArgument on a shape mismatch, a
   /// non-finite or non-positive entry, a non-monotone column or duplicate ids.
   ProfilingTable(ModelCatalog catalog, std::vector<NodeId> node_ids, const std::vector<std::vector<double>>& perf);

   std::size_t levels() const { return catalog_.size(); }
   std::size_t nodes() const { return node_ids_.size(); }
   const ModelCatalog& catalog() const { return catalog_; }
   const std::vector<NodeId>& node_ids() const { return node_ids_; }

   double perf(int level, std::size_t column) const { return perf_[static_cast<std::size_t>(level) * node_ids_.size() + column]; }
   /// Total cluster throughput when every node runs `level`.
   double level_total(int level) const;
   std::vector<double> column(std::size_t column) const;
   std::vector<double> row(int level) const;
   std::size_t column_of(NodeId node) const;
   bool has_node(NodeId node) const;

   /// Table with only the listed nodes, in the listed order.
   ProfilingTable restricted(std::span<const NodeId> nodes) const;
   /// Table with the first `count` levels only.
   ProfilingTable with_levels(std::size_t count) const;

   friend bool operator==(const ProfilingTable&, const ProfilingTable&) = default;

 private:
   ModelCatalog catalog_;
   std::vector<NodeId> node_ids_;
   std::vector<double> perf_;
};

/// Rounds a throughput value onto the profiling grid.
double snap_perf(double value);

/// True when `achieved` meets `required` up to floating-point noise.
bool meets(double achieved, double required);

struct InferenceRequest {
   RequestId id = 0;
   std::int64_t batch_size = 0;
   double perf_req = 0.0;
   double acc_req = 0.0;

   /// Throws InvalidArgument unless R >= 1, P > 0 and 0 < A <= catalog max.
   void validate(const ModelCatalog& catalog) const;

   friend bool operator==(const InferenceRequest&, const InferenceRequest&) = default;
};

struct NodeShare {
   NodeId node = 0;
   std::int64_t images = 0;
   int level = 0;
   double predicted_perf = 0.0;

   friend bool operator==(const NodeShare&, const NodeShare&) = default;
};

struct Assignment {
   std::vector<NodeShare> shares;
   double predicted_throughput = 0.0;
   double predicted_weighted_accuracy = 0.0;
   bool feasible_perf = false;
   bool feasible_acc = false;

   std::int64_t total_images() const;
   const NodeShare* share_of(NodeId node) const;

   friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Throws InvalidArgument if the shares do not sum to `batch_size`, use an
/// unknown level or hold a negative image count.
void validate_assignment(const Assignment& assignment, std::int64_t batch_size, const ModelCatalog& catalog);

/// Image-weighted catalog accuracy: sum(w_i * acc(level_i)) / sum(w_i).
/// Throws InvalidArgument when the assignment carries no images.
double weighted_accuracy(const Assignment& assignment, const ModelCatalog& catalog);

/// Result of one node executing one assignment.
struct TaskResult {
   RequestId request_id = 0;
   NodeId node = 0;
   std::int64_t images_done = 0;
   std::int64_t top5_correct = 0;
   std::int64_t elapsed_ms = 0;

   friend bool operator==(const TaskResult&, const TaskResult&) = default;
};

struct NodeOutcome {
   NodeId node = 0;
   double elapsed = 0.0;  // seconds from request start until the node's last result
   std::int64_t images = 0;
   std::int64_t correct = 0;

   friend bool operator==(const NodeOutcome&, const NodeOutcome&) = default;
};

struct RequestOutcome {
   RequestId request_id = 0;
   std::int64_t batch_size = 0;
   double achieved_throughput = 0.0;
   double empirical_top5 = 0.0;
   /// Image-weighted catalog accuracy of the models that actually ran.
   double delivered_accuracy = 0.0;
   double makespan = 0.0;
   std::vector<NodeOutcome> per_node;
   bool perf_violation = false;
   bool acc_violation = false;

   friend bool operator==(const RequestOutcome&, const RequestOutcome&) = default;
};

/// Fills the derived fields (throughput, accuracy, makespan) from `per_node`:
/// throughput = R / max elapsed, empirical top-5 = sum(correct) / R.
void finalize_outcome(RequestOutcome& outcome);

/// Largest-remainder split of `total` proportional to `weights`. Ties in the
/// fractional part go to the lower index. Throws InvalidArgument if the
/// weights are empty, negative or all zero.
std::vector<std::int64_t> apportion(std::int64_t total, std::span<const double> weights);

/// Equal split; the first `total % parts` entries receive one extra.
std::vector<std::int64_t> split_evenly(std::int64_t total, std::size_t parts);

} // namespace edgedist
