#pragma once

#include "neardup/clusters.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace neardup {

// The six cluster types. Only the Identical rule is exact (byte equality);
// the rest are stated heuristics over token alignments, with every threshold
// exposed in TaxonomyConfig.
enum class ClusterType {
    Templates,
    Identical,
    Copyediting,
    FactualDrift,
    References,
    Other,
};

constexpr int kClusterTypeCount = 6;

const char* to_string(ClusterType type);

struct ClusterLabel {
    ClusterType label = ClusterType::Other;
    std::string evidence;  // which rule fired, with its supporting numbers
};

struct TaxonomyConfig {
    // "Shared frame": at least this fraction of aligned tokens equal.
    double frame_share_min = 0.7;
    // Copyediting additionally requires the differing-token fraction at most this.
    double copyedit_max_diff_ratio = 0.3;
    // Templates needs this many members; numeric diffs between only two
    // members classify as FactualDrift instead.
    uint32_t templates_min_members = 3;
    // References: this many member texts matching the citation pattern
    // (a 4-digit year plus comma-separated capitalized segments).
    uint32_t references_min_matches = 2;
    // Pairwise alignment considers at most this many members per cluster.
    uint32_t max_pair_members = 12;
};

// Decision cascade: Identical (exact) -> References -> Templates ->
// FactualDrift -> Copyediting -> Other. Deterministic and invariant to
// member ordering. Requires texts and size >= 2.
ClusterLabel classify(const MergedCluster& cluster, const TaxonomyConfig& config = {});

struct LabelCount {
    ClusterType label;
    uint64_t count = 0;
    double fraction = 0.0;
};

// Per-label counts and fractions in fixed label order; all six rows always.
std::vector<LabelCount> tabulate(const std::vector<ClusterLabel>& labels);

std::string format_label_table(const std::vector<LabelCount>& table);

// Uniform sample of k clusters without replacement, deterministic per seed,
// returned in original order. Throws std::invalid_argument if k exceeds the
// cluster count.
std::vector<MergedCluster> sample_clusters(const std::vector<MergedCluster>& clusters,
                                           size_t k, uint64_t seed);

}  // namespace neardup
