#pragma once

#include "neardup/corpus.hpp"
#include "neardup/minhash.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace neardup {

// Wire encoding of a signature used as the grouping key: big-endian
// draw_index (2 bytes) followed by sig_len big-endian 8-byte values.
// Lexicographic byte order therefore equals (draw_index, values) order,
// and equal keys correspond exactly to equal Signatures.
std::string encode_signature_key(const Signature& sig);
Signature decode_signature_key(std::string_view key);

constexpr size_t signature_key_size(uint32_t sig_len) {
    return 2 + size_t(sig_len) * 8;
}

// One intermediate (signature key, sentence id) pair from the map stage.
struct Emission {
    std::string key;
    SentenceId id;
};

// All sentence ids sharing one signature key, size >= 2,
// deduplicated and sorted ascending.
struct RawCluster {
    std::string key;
    std::vector<SentenceId> members;
};

// chunk -> shingle -> minhash -> signatures for one document; emits exactly
// num_sigs emissions per surviving sentence.
std::vector<Emission> map_document(const Document& doc,
                                   const PipelineParams& params,
                                   const HashFamily& family,
                                   const SignatureSelections& selections);

struct GroupOptions {
    std::string tmp_dir;            // empty: std::filesystem::temp_directory_path()
    size_t sort_mem_bytes = 256ull << 20;
    uint32_t workers = 1;           // parallelism of the partition-wise sort
};

// Sort-based grouping with bounded memory. Emissions are partitioned by key
// prefix; a partition whose buffer outgrows its budget is sorted and spilled
// to a run file under tmp_dir. for_each_group merges buffer and runs per
// partition and walks groups in ascending key order, so the output is a pure
// function of the emission multiset regardless of add() interleaving.
class SignatureGrouper {
  public:
    SignatureGrouper(size_t key_size, GroupOptions options);
    ~SignatureGrouper();

    SignatureGrouper(const SignatureGrouper&) = delete;
    SignatureGrouper& operator=(const SignatureGrouper&) = delete;

    // Thread-safe.
    void add(const Emission& emission);
    void add_batch(const std::vector<Emission>& emissions);

    // Sorts remaining buffers (options.workers at a time), then streams
    // collision groups key-ascending. Call once.
    void for_each_group(const std::function<void(RawCluster&&)>& sink);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Eager convenience wrapper over SignatureGrouper.
std::vector<RawCluster> group_by_signature(const std::vector<Emission>& emissions,
                                           const GroupOptions& options = {});

struct PipelineOptions {
    uint32_t workers = 1;  // map-stage worker threads
    GroupOptions group;
};

// Full map/group stage: filters articles, fans documents out to a worker
// pool, groups emissions, and streams collision clusters to the sink.
// The cluster set is independent of worker count and document scheduling.
void run_pipeline(const DocumentSource& source,
                  const PipelineParams& params,
                  const PipelineOptions& options,
                  const std::function<void(RawCluster&&)>& sink);

// Text form used when streaming raw clusters: hex(key)<TAB>doc:idx,doc:idx,…
std::string format_raw_cluster(const RawCluster& cluster);

}  // namespace neardup
