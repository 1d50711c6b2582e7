#pragma once

#include "neardup/corpus.hpp"
#include "neardup/minhash.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace neardup {

// Resolved configuration of one dedup run. Serialized to
// config.resolved.json next to the outputs so runs are reproducible.
struct RunConfig {
    std::string input;
    CorpusFormat format = CorpusFormat::JsonLines;
    std::string output_dir;
    PipelineParams params;
    std::optional<double> second_pass;  // exact-Jaccard threshold; off by default
    uint32_t workers = 0;               // 0: available cores
    size_t sort_mem_mb = 256;
    std::string tmp_dir;

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
};

// Exit codes: 0 success, 1 runtime error, 2 usage error.
int cmd_dedup(const RunConfig& config);

// Subcommand dispatch for ingest/dedup/tune/classify/stats.
int run_cli(int argc, const char* const* argv);

}  // namespace neardup
