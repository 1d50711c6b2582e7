#include "neardup/cli.hpp"

#include "neardup/clusters.hpp"
#include "neardup/pipeline.hpp"
#include "neardup/taxonomy.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

namespace neardup {

namespace {

uint32_t effective_workers(uint32_t requested) {
    if (requested > 0)
        return requested;
    const unsigned cores = std::thread::hardware_concurrency();
    return cores > 0 ? cores : 1;
}

nlohmann::ordered_json params_to_json(const PipelineParams& params) {
    nlohmann::ordered_json out;
    out["shingle_len"] = params.shingle_len;
    out["family_size"] = params.family_size;
    out["sig_len"] = params.sig_len;
    out["num_sigs"] = params.num_sigs;
    out["hash_bits"] = params.hash_bits;
    out["min_shingles"] = params.min_shingles;
    out["max_shingles"] = params.max_shingles;
    out["seed"] = params.seed;
    return out;
}

PipelineParams params_from_json(const nlohmann::json& in) {
    PipelineParams params;
    params.shingle_len = in.value("shingle_len", params.shingle_len);
    params.family_size = in.value("family_size", params.family_size);
    params.sig_len = in.value("sig_len", params.sig_len);
    params.num_sigs = in.value("num_sigs", params.num_sigs);
    params.hash_bits = in.value("hash_bits", params.hash_bits);
    params.min_shingles = in.value("min_shingles", params.min_shingles);
    params.max_shingles = in.value("max_shingles", params.max_shingles);
    params.seed = in.value("seed", params.seed);
    return params;
}

// Writes through a temp name and renames into place, so a failed run never
// leaves a partial file under the final name.
class AtomicFile {
  public:
    explicit AtomicFile(const std::filesystem::path& path)
        : path_(path), tmp_(path.string() + ".tmp"), out_(tmp_, std::ios::binary) {
        if (!out_)
            throw std::runtime_error("cannot write output file: " + tmp_.string());
    }

    std::ostream& stream() { return out_; }

    void commit() {
        out_.close();
        if (!out_)
            throw std::runtime_error("cannot finish output file: " + tmp_.string());
        std::filesystem::rename(tmp_, path_);
        committed_ = true;
    }

    ~AtomicFile() {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

  private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

// An output target that is either stdout ("-") or a file.
class OutputTarget {
  public:
    explicit OutputTarget(const std::string& path) {
        if (path != "-") {
            file_.emplace(path, std::ios::binary);
            if (!*file_)
                throw std::runtime_error("cannot write output file: " + path);
        }
    }

    std::ostream& stream() { return file_ ? *file_ : std::cout; }

  private:
    std::optional<std::ofstream> file_;
};

std::vector<uint32_t> parse_uint_list(const std::string& text, const std::string& flag) {
    std::vector<uint32_t> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            size_t used = 0;
            const unsigned long value = std::stoul(item, &used);
            if (used != item.size() || value == 0)
                throw std::invalid_argument(item);
            out.push_back(static_cast<uint32_t>(value));
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "'" + item + "' is not a positive integer");
        }
    }
    if (out.empty())
        throw CLI::ValidationError(flag, "expected a comma-separated list");
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            size_t used = 0;
            const double value = std::stod(item, &used);
            if (used != item.size())
                throw std::invalid_argument(item);
            out.push_back(value);
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "'" + item + "' is not a number");
        }
    }
    if (out.empty())
        throw CLI::ValidationError(flag, "expected a comma-separated list");
    return out;
}

CorpusFormat parse_format(const std::string& name) {
    const auto format = corpus_format_from_string(name);
    if (!format)
        throw CLI::ValidationError("--format", "unknown corpus format '" + name + "'");
    return *format;
}

struct ParamFlags {
    CLI::Option* shingle_len;
    CLI::Option* family_size;
    CLI::Option* sig_len;
    CLI::Option* num_sigs;
    CLI::Option* hash_bits;
    CLI::Option* min_shingles;
    CLI::Option* max_shingles;
    CLI::Option* seed;

    // Copies only the explicitly given fields of `flags` onto `base`.
    void apply(PipelineParams& base, const PipelineParams& flags) const {
        if (shingle_len->count())
            base.shingle_len = flags.shingle_len;
        if (family_size->count())
            base.family_size = flags.family_size;
        if (sig_len->count())
            base.sig_len = flags.sig_len;
        if (num_sigs->count())
            base.num_sigs = flags.num_sigs;
        if (hash_bits->count())
            base.hash_bits = flags.hash_bits;
        if (min_shingles->count())
            base.min_shingles = flags.min_shingles;
        if (max_shingles->count())
            base.max_shingles = flags.max_shingles;
        if (seed->count())
            base.seed = flags.seed;
    }
};

ParamFlags add_param_flags(CLI::App* cmd, PipelineParams& params) {
    ParamFlags flags;
    flags.shingle_len =
        cmd->add_option("--shingle-len", params.shingle_len, "Shingle length in characters");
    flags.family_size =
        cmd->add_option("--family-size", params.family_size, "Number of hash functions (N)");
    flags.sig_len =
        cmd->add_option("--sig-len", params.sig_len, "Minhashes per signature (K)");
    flags.num_sigs =
        cmd->add_option("--num-sigs", params.num_sigs, "Signatures per sentence (M)");
    flags.hash_bits =
        cmd->add_option("--hash-bits", params.hash_bits, "Hash value width in bits");
    flags.min_shingles = cmd->add_option("--min-shingles", params.min_shingles,
                                         "Discard sentences with fewer shingles");
    flags.max_shingles = cmd->add_option("--max-shingles", params.max_shingles,
                                         "Discard sentences with more shingles");
    flags.seed = cmd->add_option("--seed", params.seed, "Seed for the hash family and draws");
    return flags;
}

int cmd_ingest(const std::string& input, CorpusFormat format,
               const PipelineParams& params, const std::string& output) {
    params.validate();
    OutputTarget target(output);
    const auto source = make_file_source(input, format);
    const auto stream = prepare_articles(source->open());
    while (auto doc = stream->next())
        for (const SentenceRecord& sentence : chunk_sentences(*doc, params))
            target.stream() << sentence.id.doc_id << '\t' << sentence.id.index << '\t'
                            << sentence.text << '\n';
    return 0;
}

std::string shortest_double(double value) {
    char buffer[32];
    const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, end);
}

int cmd_tune(const std::vector<uint32_t>& sig_lens, uint32_t num_sigs,
             const std::vector<double>& s_grid, const std::string& output) {
    OutputTarget target(output);
    target.stream() << "K,s,p_match\n";
    for (const RecallPoint& point : recall_curve(sig_lens, num_sigs, s_grid))
        target.stream() << point.sig_len << ',' << shortest_double(point.similarity)
                        << ',' << shortest_double(point.p_match) << '\n';
    return 0;
}

int cmd_classify(const std::string& input, const std::string& output,
                 const TaxonomyConfig& config, size_t sample, uint64_t seed) {
    std::ifstream in(input, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open input file: " + input);
    std::vector<MergedCluster> clusters = read_clusters_jsonl(in);
    if (sample > 0 && sample < clusters.size())
        clusters = sample_clusters(clusters, sample, seed);

    OutputTarget target(output);
    std::vector<ClusterLabel> labels;
    labels.reserve(clusters.size());
    for (const MergedCluster& cluster : clusters) {
        const ClusterLabel label = classify(cluster, config);
        target.stream() << cluster.cluster_id << '\t' << to_string(label.label) << '\t'
                        << label.evidence << '\n';
        labels.push_back(label);
    }
    std::cerr << format_label_table(tabulate(labels));
    return 0;
}

int cmd_stats(const std::string& input, const std::string& output,
              const std::string& histogram_path) {
    std::ifstream in(input, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open input file: " + input);
    const ClusterStats stats = compute_stats(read_clusters_jsonl(in));
    OutputTarget target(output);
    target.stream() << stats_to_json(stats);
    if (!histogram_path.empty()) {
        OutputTarget histogram(histogram_path);
        write_histogram_tsv(histogram.stream(), stats);
    }
    return 0;
}

}  // namespace

std::string RunConfig::to_json() const {
    nlohmann::ordered_json out;
    out["input"] = input;
    out["format"] = neardup::to_string(format);
    out["output_dir"] = output_dir;
    out["params"] = params_to_json(params);
    if (second_pass)
        out["second_pass"] = *second_pass;
    else
        out["second_pass"] = nullptr;
    out["workers"] = workers;
    out["sort_mem_mb"] = sort_mem_mb;
    out["tmp_dir"] = tmp_dir;
    return out.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
    const nlohmann::json parsed = nlohmann::json::parse(text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
        throw std::runtime_error("config is not a JSON object");
    RunConfig config;
    config.input = parsed.value("input", config.input);
    if (parsed.contains("format")) {
        const auto format = corpus_format_from_string(parsed["format"].get<std::string>());
        if (!format)
            throw std::runtime_error("unknown corpus format in config: " +
                                     parsed["format"].get<std::string>());
        config.format = *format;
    }
    config.output_dir = parsed.value("output_dir", config.output_dir);
    if (parsed.contains("params"))
        config.params = params_from_json(parsed["params"]);
    if (parsed.contains("second_pass") && !parsed["second_pass"].is_null())
        config.second_pass = parsed["second_pass"].get<double>();
    config.workers = parsed.value("workers", config.workers);
    config.sort_mem_mb = parsed.value("sort_mem_mb", config.sort_mem_mb);
    config.tmp_dir = parsed.value("tmp_dir", config.tmp_dir);
    return config;
}

int cmd_dedup(const RunConfig& config) {
    config.params.validate();
    RunConfig resolved = config;
    resolved.workers = effective_workers(config.workers);

    const std::filesystem::path out_dir(config.output_dir);
    std::filesystem::create_directories(out_dir);

    const auto source = make_file_source(config.input, config.format);

    PipelineOptions options;
    options.workers = resolved.workers;
    options.group.tmp_dir = config.tmp_dir;
    options.group.sort_mem_bytes = config.sort_mem_mb << 20;
    options.group.workers = resolved.workers;

    ClusterMerger merger;
    uint64_t raw_count = 0;
    run_pipeline(*source, config.params, options, [&](RawCluster&& raw) {
        ++raw_count;
        merger.add(raw);
    });
    std::vector<MergedCluster> clusters = merger.finish();
    std::cerr << "grouped " << raw_count << " raw clusters into " << clusters.size()
              << " merged clusters\n";

    reconstruct(clusters, *source, config.params);
    if (config.second_pass)
        clusters = second_pass_filter_all(clusters, *config.second_pass,
                                          config.params.shingle_len);
    const ClusterStats stats = compute_stats(clusters);

    AtomicFile clusters_file(out_dir / "clusters.jsonl");
    write_clusters_jsonl(clusters_file.stream(), clusters);
    AtomicFile stats_file(out_dir / "stats.json");
    stats_file.stream() << stats_to_json(stats);
    AtomicFile histogram_file(out_dir / "histogram.tsv");
    write_histogram_tsv(histogram_file.stream(), stats);
    AtomicFile config_file(out_dir / "config.resolved.json");
    config_file.stream() << resolved.to_json();

    clusters_file.commit();
    stats_file.commit();
    histogram_file.commit();
    config_file.commit();
    return 0;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Corpus-scale near-duplicate sentence detection"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand(
        "ingest", "Parse a corpus and dump surviving sentences as TSV");
    std::string ingest_input, ingest_output = "-", ingest_format = "jsonl";
    PipelineParams ingest_params;
    ingest->add_option("--input,-i", ingest_input, "Corpus file or directory")->required();
    ingest->add_option("--format,-f", ingest_format,
                       "Corpus format: mediawiki-xml, jsonl, text");
    ingest->add_option("--output,-o", ingest_output, "Output TSV path ('-' for stdout)");
    (void)add_param_flags(ingest, ingest_params);

    // dedup
    auto* dedup = app.add_subcommand(
        "dedup", "Run the full pipeline and write cluster and stats files");
    std::string dedup_input, dedup_output_dir, dedup_format = "jsonl";
    std::string dedup_config_path, dedup_tmp_dir;
    PipelineParams dedup_params;
    double dedup_second_pass = 0.9;
    uint32_t dedup_workers = 0;
    size_t dedup_sort_mem = 256;
    auto* dedup_input_opt =
        dedup->add_option("--input,-i", dedup_input, "Corpus file or directory");
    auto* dedup_format_opt = dedup->add_option(
        "--format,-f", dedup_format, "Corpus format: mediawiki-xml, jsonl, text");
    auto* dedup_output_opt =
        dedup->add_option("--output-dir,-o", dedup_output_dir, "Output directory");
    auto* dedup_second_opt = dedup->add_option(
        "--second-pass", dedup_second_pass,
        "Enable the exact-Jaccard second pass at this threshold");
    auto* dedup_workers_opt =
        dedup->add_option("--workers", dedup_workers, "Worker threads (0: all cores)");
    auto* dedup_sort_opt = dedup->add_option("--sort-mem-mb", dedup_sort_mem,
                                             "Grouping memory budget in MiB");
    auto* dedup_tmp_opt =
        dedup->add_option("--tmp-dir", dedup_tmp_dir, "Spill directory for grouping");
    dedup->add_option("--config", dedup_config_path,
                      "JSON config file; explicit flags override its values");
    const ParamFlags dedup_param_flags = add_param_flags(dedup, dedup_params);

    // tune
    auto* tune = app.add_subcommand(
        "tune", "Emit the analytical recall curve as CSV");
    std::string tune_k = "10", tune_grid, tune_output = "-";
    uint32_t tune_m = 10;
    tune->add_option("--K", tune_k, "Comma-separated signature lengths");
    tune->add_option("--M", tune_m, "Number of signatures per sentence");
    tune->add_option("--s-grid", tune_grid,
                     "Comma-separated Jaccard similarities (default 0.05..1.00)");
    tune->add_option("--output,-o", tune_output, "Output CSV path ('-' for stdout)");

    // classify
    auto* classify_cmd = app.add_subcommand(
        "classify", "Label clusters with the six-way heuristic taxonomy");
    std::string classify_input, classify_output = "-";
    TaxonomyConfig taxonomy;
    size_t classify_sample = 0;
    uint64_t classify_seed = 0;
    classify_cmd->add_option("--input,-i", classify_input, "clusters.jsonl path")
        ->required();
    classify_cmd->add_option("--output,-o", classify_output,
                             "Label TSV path ('-' for stdout); summary goes to stderr");
    classify_cmd->add_option("--sample", classify_sample,
                             "Classify a random sample of this many clusters (0: all)");
    classify_cmd->add_option("--seed", classify_seed, "Sampling seed");
    classify_cmd->add_option("--frame-share-min", taxonomy.frame_share_min,
                             "Minimum aligned-token share for a shared frame");
    classify_cmd->add_option("--copyedit-max-diff-ratio", taxonomy.copyedit_max_diff_ratio,
                             "Maximum differing-token ratio for Copyediting");
    classify_cmd->add_option("--templates-min-members", taxonomy.templates_min_members,
                             "Minimum cluster size for Templates");
    classify_cmd->add_option("--references-min-matches", taxonomy.references_min_matches,
                             "Citation-shaped texts needed for References");
    classify_cmd->add_option("--max-pair-members", taxonomy.max_pair_members,
                             "Alignment considers at most this many members");

    // stats
    auto* stats_cmd = app.add_subcommand(
        "stats", "Recompute statistics from a clusters.jsonl file");
    std::string stats_input, stats_output = "-", stats_histogram;
    stats_cmd->add_option("--input,-i", stats_input, "clusters.jsonl path")->required();
    stats_cmd->add_option("--output,-o", stats_output,
                          "Stats JSON path ('-' for stdout)");
    stats_cmd->add_option("--histogram", stats_histogram,
                          "Also write the size histogram TSV to this path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& help) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& error) {
        std::cerr << "usage error: " << error.what() << "\n";
        return 2;
    }

    try {
        if (ingest->parsed())
            return cmd_ingest(ingest_input, parse_format(ingest_format), ingest_params,
                              ingest_output);
        if (dedup->parsed()) {
            RunConfig config;
            if (!dedup_config_path.empty()) {
                std::ifstream file(dedup_config_path, std::ios::binary);
                if (!file)
                    throw std::runtime_error("cannot open config file: " +
                                             dedup_config_path);
                std::ostringstream text;
                text << file.rdbuf();
                config = RunConfig::from_json(text.str());
            }
            if (dedup_input_opt->count())
                config.input = dedup_input;
            if (dedup_format_opt->count())
                config.format = parse_format(dedup_format);
            if (dedup_output_opt->count())
                config.output_dir = dedup_output_dir;
            if (dedup_second_opt->count())
                config.second_pass = dedup_second_pass;
            if (dedup_workers_opt->count())
                config.workers = dedup_workers;
            if (dedup_sort_opt->count())
                config.sort_mem_mb = dedup_sort_mem;
            if (dedup_tmp_opt->count())
                config.tmp_dir = dedup_tmp_dir;
            dedup_param_flags.apply(config.params, dedup_params);
            if (config.input.empty())
                throw CLI::RequiredError("--input");
            if (config.output_dir.empty())
                throw CLI::RequiredError("--output-dir");
            return cmd_dedup(config);
        }
        if (tune->parsed()) {
            const std::vector<uint32_t> sig_lens = parse_uint_list(tune_k, "--K");
            std::vector<double> grid;
            if (tune_grid.empty())
                for (int i = 1; i <= 20; ++i)
                    grid.push_back(i * 0.05);
            else
                grid = parse_double_list(tune_grid, "--s-grid");
            return cmd_tune(sig_lens, tune_m, grid, tune_output);
        }
        if (classify_cmd->parsed())
            return cmd_classify(classify_input, classify_output, taxonomy,
                                classify_sample, classify_seed);
        if (stats_cmd->parsed())
            return cmd_stats(stats_input, stats_output, stats_histogram);
    } catch (const CLI::ParseError& error) {
        std::cerr << "usage error: " << error.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& error) {
        std::cerr << "usage error: " << error.what() << "\n";
        return 2;
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace neardup
