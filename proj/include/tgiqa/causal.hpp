#pragma once

// Causal DAGs, d-separation queries, the built-in claim table, and
// structural-causal-model simulation with stratified effect estimates.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tgiqa/rng.hpp"

namespace tgiqa {

using Edge = std::pair<std::string, std::string>;  // (parent, child)

class Dag {
public:
    Dag() = default;
    /// Throws InvalidArgument on duplicate nodes or edges, UnknownNode for an
    /// edge endpoint outside `nodes`, CycleDetected for self-loops and cycles.
    Dag(std::vector<std::string> nodes, std::vector<Edge> edges);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    bool has_node(const std::string& name) const;
    bool has_edge(const std::string& parent, const std::string& child) const;
    std::size_t index(const std::string& name) const;  // UnknownNode
    const std::vector<std::size_t>& parents(std::size_t v) const { return parents_[v]; }
    const std::vector<std::size_t>& children(std::size_t v) const { return children_[v]; }
    std::vector<std::string> parent_names(const std::string& name) const;
    /// Topological order (Kahn, ties broken by node index).
    const std::vector<std::size_t>& topological_order() const { return topo_; }

    Dag with_edge(const std::string& parent, const std::string& child) const;
    Dag with_node(const std::string& name) const;
    Dag without_edge(const std::string& parent, const std::string& child) const;

private:
    std::vector<std::string> nodes_;
    std::vector<Edge> edges_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::size_t> topo_;
};

/// True iff every path between a and b is blocked given z. Sets must be
/// disjoint. Reachability (Bayes-ball), linear in the graph size.
bool d_separated(const Dag& dag, const std::vector<std::string>& a, const std::vector<std::string>& b,
                 const std::vector<std::string>& z);
bool d_separated(const Dag& dag, std::span<const std::size_t> a, std::span<const std::size_t> b,
                 std::span<const std::size_t> z);

/// baseline, shared_z, strong_tg, weak_tg, nr_iqa, fr_iqa,
/// common_corruptions, baseline_latents.
std::map<std::string, Dag> builtin_dags();

struct Claim {
    std::string dag;
    std::vector<std::string> a;
    std::vector<std::string> b;
    std::vector<std::string> z;
    /// nullopt marks an informational row: evaluated and printed, never failed.
    std::optional<bool> expected;
};

struct ClaimResult {
    Claim claim;
    bool separated = false;
    bool pass = true;
};

struct ClaimReport {
    std::vector<ClaimResult> rows;
    bool all_pass() const;
    std::size_t asserted() const;
};

std::vector<Claim> builtin_claims();
ClaimReport verify_claims(const std::vector<Claim>& claims, const std::map<std::string, Dag>& dags);
ClaimReport verify_claims();

/// "Q _||_ M | X" style rendering of a claim.
std::string claim_text(const Claim& claim);

// ---------------------------------------------------------------------------
// Structural causal models

/// Generates a node value from its parents' values (in Mechanism::parents
/// order) and a noise stream private to (row, node).
using MechanismFn = std::function<double(std::span<const double> parents, rng::Stream& noise)>;

struct Mechanism {
    std::vector<std::string> parents;
    MechanismFn fn;
};

struct ScmSpec {
    Dag dag;
    std::map<std::string, Mechanism> mechanisms;
    /// Discrete nodes usable as strata: values must be integers in [0, size).
    std::map<std::string, std::size_t> domains;
};

/// Throws InvalidArgument when a node lacks a mechanism or a mechanism's
/// argument set differs from the node's DAG parents.
void validate_scm(const ScmSpec& spec);

struct SampleFrame {
    std::vector<std::string> columns;
    std::size_t rows = 0;
    std::vector<double> data;  // row-major

    std::size_t column_index(const std::string& name) const;  // UnknownNode
    std::vector<double> column(const std::string& name) const;
    double at(std::size_t row, std::size_t col) const { return data[row * columns.size() + col]; }
};

/// Ancestral sampling; row r uses streams keyed by (seed, r, node), so the
/// frame is identical for any thread count.
SampleFrame simulate(const ScmSpec& spec, std::size_t n, std::uint64_t seed);
SampleFrame simulate_serial(const ScmSpec& spec, std::size_t n, std::uint64_t seed);

/// baseline_sim (Q _||_ M | X by construction) and shared_z_sim (Q and M share
/// a latent Z). Both stratify X into 200 levels.
std::map<std::string, ScmSpec> builtin_scms();

inline constexpr std::size_t kSimStrata = 200;

struct AceEstimate {
    double ace = 0.0;
    double threshold = 0.0;  // median of the treatment column
    std::size_t strata_used = 0;
    std::size_t strata_dropped = 0;
};

/// Median-split treatment; sum over strata of p(x) * (mean outcome | high, x
/// - mean outcome | low, x). Strata missing a level are dropped; p(x) is
/// renormalized over the kept strata. Throws NoValidStrata.
AceEstimate ace_estimate(const SampleFrame& frame, const std::string& treatment = "Q",
                         const std::string& outcome = "M", const std::string& stratum = "X");

struct StratumAverage {
    double value = 0.0;
    std::size_t strata_used = 0;
    std::size_t strata_skipped = 0;
};

/// Mean over strata of AUC(score -> binary outcome); strata with one class are skipped.
StratumAverage within_stratum_auc(const SampleFrame& frame, const std::string& score = "Q",
                                  const std::string& outcome = "M", const std::string& stratum = "X");

/// Mean over strata of the Pearson correlation; degenerate strata are skipped.
StratumAverage within_stratum_correlation(const SampleFrame& frame, const std::string& x = "Q",
                                          const std::string& y = "M", const std::string& stratum = "X");

/// Permutation test of a _||_ b within strata of the discrete columns z: b is
/// shuffled inside each stratum and the statistic is the pooled within-stratum
/// covariance. Returns (1 + #extreme) / (1 + permutations).
double stratified_permutation_p_value(const SampleFrame& frame, const std::string& a, const std::string& b,
                                      const std::vector<std::string>& z, std::size_t permutations,
                                      std::uint64_t seed);

/// Random DAG over nodes V0..V{n-1}: a keyed shuffle fixes a hidden order and
/// each forward pair becomes an edge with probability edge_prob.
Dag random_dag(std::size_t n_nodes, double edge_prob, std::uint64_t seed);

/// Linear-Gaussian SCM over `dag`; nodes listed in `discrete` are cut into
/// `levels` integer values so they can serve as strata.
ScmSpec random_linear_scm(const Dag& dag, const std::vector<std::string>& discrete, std::size_t levels,
                          std::uint64_t seed);

std::string format_frame_csv(const SampleFrame& frame);
void write_frame_csv(const std::filesystem::path& path, const SampleFrame& frame);

}  // namespace tgiqa
