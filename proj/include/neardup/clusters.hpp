#pragma once

#include "neardup/pipeline.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace neardup {

// Forest-of-pointers disjoint sets over interned sentence ids. Merging points
// one head at the other; find applies path compression. The interning table
// doubles as the sentence-id -> node lookup.
class UnionFind {
  public:
    // Interns the id if unseen and returns its dense node index.
    uint32_t intern(const SentenceId& id);

    uint32_t find(uint32_t node);
    void unite(uint32_t a, uint32_t b);

    size_t node_count() const { return parent_.size(); }
    const std::vector<SentenceId>& ids() const { return ids_; }

  private:
    std::unordered_map<SentenceId, uint32_t> index_;
    std::vector<SentenceId> ids_;
    std::vector<uint32_t> parent_;
};

// A connected component of raw clusters. texts/titles are filled by
// reconstruct() and run parallel to members; empty means not reconstructed.
struct MergedCluster {
    uint64_t cluster_id = 0;
    std::vector<SentenceId> members;  // sorted ascending, disjoint across clusters
    std::vector<std::string> texts;
    std::vector<std::string> titles;

    bool has_texts() const { return texts.size() == members.size() && !members.empty(); }
};

// Single pass over raw clusters; unions co-members and extracts connected
// components. Components are sorted by smallest member and numbered from 0.
class ClusterMerger {
  public:
    void add(const RawCluster& raw);
    std::vector<MergedCluster> finish();

  private:
    UnionFind forest_;
};

std::vector<MergedCluster> merge_clusters(const std::vector<RawCluster>& raw);

// One additional corpus pass filling texts and titles for every member.
// Memory stays proportional to the clustered sentences. The source and params
// must match the pipeline run; a member absent from the re-chunked corpus
// raises std::runtime_error naming its id (corpus drift).
void reconstruct(std::vector<MergedCluster>& clusters,
                 const DocumentSource& source,
                 const PipelineParams& params);

// Exact-Jaccard verification within one cluster: keeps the connected
// components of the graph with edges where pairwise shingle-set Jaccard >=
// threshold; components of size >= 2 survive. Requires texts.
std::vector<MergedCluster> second_pass_filter(const MergedCluster& cluster,
                                              double threshold,
                                              uint32_t shingle_len);

// Applies the filter to every cluster, then re-sorts and renumbers.
std::vector<MergedCluster> second_pass_filter_all(const std::vector<MergedCluster>& clusters,
                                                  double threshold,
                                                  uint32_t shingle_len);

// Histogram bucket for a cluster size: exact 2..16, then powers of two
// (17-32 -> 32, 33-64 -> 64, ...).
uint64_t histogram_bucket(uint64_t size);

struct ClusterStats {
    uint64_t cluster_count = 0;
    uint64_t sentence_pair_count = 0;     // sum of cluster sizes (article/sentence pairs)
    uint64_t distinct_article_count = 0;  // distinct doc ids
    uint64_t distinct_sentence_count = 0; // distinct texts when present, else distinct ids
    std::map<uint64_t, uint64_t> size_histogram;
    double fraction_clusters_le_10 = 0.0;
    double fraction_pairs_gt_10 = 0.0;
};

ClusterStats compute_stats(const std::vector<MergedCluster>& clusters);

// JSON-lines representation:
//   {"cluster_id":…, "members":[{"doc":…,"idx":…,"title":…,"text":…}]}
std::string cluster_to_json_line(const MergedCluster& cluster);
void write_clusters_jsonl(std::ostream& out, const std::vector<MergedCluster>& clusters);
std::vector<MergedCluster> read_clusters_jsonl(std::istream& in);

std::string stats_to_json(const ClusterStats& stats);
void write_histogram_tsv(std::ostream& out, const ClusterStats& stats);

}  // namespace neardup
