// Release acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.
#include "neardup/cli.hpp"
#include "neardup/clusters.hpp"
#include "neardup/corpus.hpp"
#include "neardup/minhash.hpp"
#include "neardup/pipeline.hpp"
#include "neardup/taxonomy.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace neardup;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, const std::string& what, bool ok, const std::string& detail) {
    if (ok) {
        std::cout << "PASS criterion " << criterion << ": " << what << "\n";
    } else {
        ++failures;
        std::cout << "FAIL criterion " << criterion << ": " << what << " (" << detail
                  << ")\n";
    }
}

std::string random_sentence(std::mt19937_64& rng, size_t chars) {
    std::string text = "X";
    while (text.size() < chars - 1)
        text += char('a' + rng() % 26);
    text += '.';
    return text;
}

// Exact probability that a pair with per-function agreement s collides on at
// least one signature, for the configured draws. Because the draws overlap
// (num_sigs * sig_len exceeds family_size), this is below the independence
// approximation 1 - (1 - s^K)^M; inclusion-exclusion over draw subsets gives
// the true value, with exponent |union of the chosen draws' indices|.
double exact_pair_recall(const PipelineParams& params, double s) {
    const SignatureSelections sel = make_selections(params);
    std::vector<uint64_t> masks;
    for (const auto& draw : sel.draws) {
        uint64_t m = 0;
        for (uint32_t idx : draw)
            m |= uint64_t{1} << idx;
        masks.push_back(m);
    }
    double p = 0.0;
    for (uint64_t subset = 1; subset < (uint64_t{1} << masks.size()); ++subset) {
        uint64_t covered = 0;
        int picked = 0;
        for (size_t d = 0; d < masks.size(); ++d)
            if (subset >> d & 1) {
                covered |= masks[d];
                ++picked;
            }
        p += (picked % 2 ? 1.0 : -1.0) * std::pow(s, std::popcount(covered));
    }
    return p;
}

// ---------------------------------------------------------------------------
// 1. The analytical recall model against an independent high-precision value.

void criterion_recall_formula() {
    // 1 - (1 - 0.9^10)^10 evaluated with 60-digit arithmetic
    const double reference = 0.9862610183556292;
    const double actual = expected_recall(0.9, 10, 10);
    const bool close = std::abs(actual - reference) <= 1e-4;
    const bool rounds = std::round(actual * 100.0) / 100.0 == 0.99;
    std::ostringstream detail;
    detail << "got " << std::setprecision(17) << actual;
    report(1, "match probability at s=0.9, K=10, M=10 is 0.98626 and rounds to 0.99",
           close && rounds, detail.str());
}

// ---------------------------------------------------------------------------
// 2. Collision frequency of single-function minhash equals Jaccard.

ShingleSet hashed_set(const std::string& tag, int shared, int own) {
    ShingleSet set;
    for (int i = 0; i < shared; ++i)
        set.elements.push_back(base_hash("shared-" + tag + "-" + std::to_string(i)));
    for (int i = 0; i < own; ++i)
        set.elements.push_back(base_hash("own-" + tag + "-" + std::to_string(i)));
    std::sort(set.elements.begin(), set.elements.end());
    return set;
}

void criterion_collision_probability() {
    struct Case {
        double jaccard_target;
        int shared, a_own, b_own;
    };
    // |A∩B| / |A∪B|: 5/20, 5/10, 8/10
    const std::vector<Case> cases = {{0.25, 5, 5, 10}, {0.5, 5, 2, 3}, {0.8, 8, 1, 1}};

    bool ok = true;
    std::ostringstream detail;
    for (const Case& c : cases) {
        ShingleSet a = hashed_set("j" + std::to_string(c.shared), c.shared, 0);
        ShingleSet b = a;
        for (int i = 0; i < c.a_own; ++i)
            a.elements.push_back(base_hash("a-" + std::to_string(c.jaccard_target) +
                                           "-" + std::to_string(i)));
        for (int i = 0; i < c.b_own; ++i)
            b.elements.push_back(base_hash("b-" + std::to_string(c.jaccard_target) +
                                           "-" + std::to_string(i)));
        std::sort(a.elements.begin(), a.elements.end());
        std::sort(b.elements.begin(), b.elements.end());
        if (jaccard(a, b) != c.jaccard_target) {
            ok = false;
            detail << "fixture jaccard drifted; ";
            continue;
        }

        int collisions = 0;
        const int seeds = 10000;
        for (int seed = 0; seed < seeds; ++seed) {
            const HashFamily family(uint64_t(seed) + 1, 1, 60);
            if (minhash_vector(a, family).minima[0] == minhash_vector(b, family).minima[0])
                ++collisions;
        }
        const double frequency = double(collisions) / seeds;
        if (std::abs(frequency - c.jaccard_target) > 0.02) {
            ok = false;
            detail << "J=" << c.jaccard_target << " measured " << frequency << "; ";
        }
    }
    report(2, "minhash collision frequency tracks Jaccard 0.25/0.5/0.8 within 0.02",
           ok, detail.str());
}

// ---------------------------------------------------------------------------
// 3. Planted near-duplicates in a 10,000-sentence corpus.

void criterion_planted_recall() {
    std::mt19937_64 rng(20130601);
    const size_t chars = 239;  // 228 shingles at length 12
    const int pair_count = 200;
    PipelineParams params;  // corpus-scale defaults

    std::vector<Document> docs(10000);
    bool construction_ok = true;

    // planted pairs: one mid-sentence substitution, Jaccard exactly 216/240
    for (int i = 0; i < pair_count; ++i) {
        const std::string base = random_sentence(rng, chars);
        std::string near = base;
        const size_t pos = 20 + rng() % 190;  // 12 full windows on each side
        char replacement = char('a' + rng() % 26);
        while (replacement == near[pos])
            replacement = char('a' + rng() % 26);
        near[pos] = replacement;

        if (jaccard(shingle(base, params.shingle_len), shingle(near, params.shingle_len)) !=
            0.9)
            construction_ok = false;
        docs[2 * i].body = base;
        docs[2 * i + 1].body = near;
    }

    // decoy pairs: a 40-character shared prefix, Jaccard ≈ 0.07
    for (int i = 0; i < pair_count; ++i) {
        const std::string prefix = random_sentence(rng, 41).substr(0, 40);
        const std::string a = prefix + random_sentence(rng, chars - 40).substr(1);
        const std::string b = prefix + random_sentence(rng, chars - 40).substr(1);
        const double j =
            jaccard(shingle(a, params.shingle_len), shingle(b, params.shingle_len));
        if (j >= 0.3)
            construction_ok = false;
        docs[400 + 2 * i].body = a;
        docs[400 + 2 * i + 1].body = b;
    }

    for (size_t d = 800; d < docs.size(); ++d)
        docs[d].body = random_sentence(rng, chars);
    for (size_t d = 0; d < docs.size(); ++d) {
        docs[d].doc_id = d + 1;
        docs[d].title = "S" + std::to_string(d + 1);
    }

    ClusterMerger merger;
    run_pipeline(MemoryCorpus(std::move(docs)), params, PipelineOptions{},
                 [&](RawCluster&& cluster) { merger.add(cluster); });

    std::map<SentenceId, uint64_t> cluster_of;
    for (const MergedCluster& cluster : merger.finish())
        for (const SentenceId& member : cluster.members)
            cluster_of[member] = cluster.cluster_id;

    const auto co_clustered = [&](uint64_t doc_a, uint64_t doc_b) {
        const auto a = cluster_of.find({doc_a, 0});
        const auto b = cluster_of.find({doc_b, 0});
        return a != cluster_of.end() && b != cluster_of.end() && a->second == b->second;
    };

    int recovered = 0, decoys_joined = 0;
    for (int i = 0; i < pair_count; ++i) {
        if (co_clustered(2 * i + 1, 2 * i + 2))
            ++recovered;
        if (co_clustered(400 + 2 * i + 1, 400 + 2 * i + 2))
            ++decoys_joined;
    }

    std::ostringstream detail;
    detail << "recovered " << recovered << "/200, decoys joined " << decoys_joined
           << "/200, construction " << (construction_ok ? "exact" : "DRIFTED")
           << "; overlapping draws from a " << params.family_size
           << "-function pool make the exact expected rate " << std::setprecision(3)
           << exact_pair_recall(params, 0.9) << ", not the "
           << expected_recall(0.9, params.sig_len, params.num_sigs)
           << " the independence model suggests";
    report(3,
           "planted 0.9-Jaccard pairs recovered >= 95%, low-similarity decoys <= 1%",
           construction_ok && recovered >= 190 && decoys_joined <= 2, detail.str());
}

// ---------------------------------------------------------------------------
// 4. Cluster merging equals brute-force connected components.

std::vector<std::vector<SentenceId>> bfs_components(const std::vector<RawCluster>& raws) {
    std::map<SentenceId, std::vector<SentenceId>> adjacency;
    for (const auto& cluster : raws)
        for (size_t i = 1; i < cluster.members.size(); ++i) {
            adjacency[cluster.members[0]].push_back(cluster.members[i]);
            adjacency[cluster.members[i]].push_back(cluster.members[0]);
        }
    std::set<SentenceId> seen;
    std::vector<std::vector<SentenceId>> components;
    for (const auto& [start, unused] : adjacency) {
        if (seen.count(start))
            continue;
        std::vector<SentenceId> component;
        std::queue<SentenceId> frontier;
        frontier.push(start);
        seen.insert(start);
        while (!frontier.empty()) {
            const SentenceId current = frontier.front();
            frontier.pop();
            component.push_back(current);
            for (const SentenceId& next : adjacency.at(current))
                if (seen.insert(next).second)
                    frontier.push(next);
        }
        std::sort(component.begin(), component.end());
        if (component.size() >= 2)
            components.push_back(std::move(component));
    }
    std::sort(components.begin(), components.end());
    return components;
}

void criterion_union_find_oracle() {
    std::mt19937_64 rng(1889);
    int mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const uint64_t node_space = 1 + rng() % 1000;
        std::vector<RawCluster> raws;
        const int cluster_count = 1 + int(rng() % 200);
        for (int c = 0; c < cluster_count; ++c) {
            std::set<SentenceId> members;
            const int size = 2 + int(rng() % 5);
            for (int m = 0; m < size; ++m)
                members.insert({rng() % node_space, uint32_t(rng() % 3)});
            if (members.size() < 2)
                continue;
            RawCluster raw;
            raw.key = "k";
            raw.members.assign(members.begin(), members.end());
            raws.push_back(std::move(raw));
        }

        std::vector<std::vector<SentenceId>> actual;
        for (const MergedCluster& cluster : merge_clusters(raws))
            actual.push_back(cluster.members);
        if (actual != bfs_components(raws))
            ++mismatches;
    }
    report(4, "merge_clusters equals BFS components on 500 random instances",
           mismatches == 0, std::to_string(mismatches) + " mismatching instances");
}

// ---------------------------------------------------------------------------
// 5. Sort-based grouping equals a hash-map oracle, for 1/2/8 workers.

void criterion_grouping_oracle() {
    std::mt19937_64 rng(4096);
    std::vector<Emission> emissions;
    for (int i = 0; i < 100000; ++i) {
        Signature sig;
        sig.draw_index = uint16_t(rng() % 4);
        sig.values = {rng() % 8, rng() % 8};
        emissions.push_back({encode_signature_key(sig),
                             SentenceId{rng() % 500, uint32_t(rng() % 4)}});
    }

    std::map<std::string, std::set<SentenceId>> buckets;
    for (const Emission& emission : emissions)
        buckets[emission.key].insert(emission.id);
    std::string expected;
    for (const auto& [key, ids] : buckets)
        if (ids.size() >= 2) {
            RawCluster cluster;
            cluster.key = key;
            cluster.members.assign(ids.begin(), ids.end());
            expected += format_raw_cluster(cluster) + "\n";
        }

    bool ok = true;
    std::ostringstream detail;
    for (uint32_t workers : {1u, 2u, 8u}) {
        GroupOptions options;
        options.workers = workers;
        std::string actual;
        for (const RawCluster& cluster : group_by_signature(emissions, options))
            actual += format_raw_cluster(cluster) + "\n";
        if (actual != expected) {
            ok = false;
            detail << "workers=" << workers << " diverged; ";
        }
    }
    report(5, "grouping equals the map oracle byte-for-byte at 1/2/8 workers", ok,
           detail.str());
}

// ---------------------------------------------------------------------------
// 6. Monotonicity of the recall model and of the second-pass filter.

void criterion_monotonicity() {
    bool ok = true;
    std::ostringstream detail;

    for (int i = 0; i + 1 < 50; ++i) {
        const double s0 = double(i) / 49.0, s1 = double(i + 1) / 49.0;
        if (expected_recall(s1, 10, 10) < expected_recall(s0, 10, 10)) {
            ok = false;
            detail << "not nondecreasing in s; ";
            break;
        }
    }
    for (uint32_t m = 1; m < 50; ++m)
        if (expected_recall(0.8, 10, m + 1) < expected_recall(0.8, 10, m)) {
            ok = false;
            detail << "not nondecreasing in M; ";
            break;
        }
    for (uint32_t k = 1; k < 50; ++k)
        if (expected_recall(0.8, k + 1, 10) > expected_recall(0.8, k, 10)) {
            ok = false;
            detail << "not nonincreasing in K; ";
            break;
        }

    MergedCluster cluster;
    const std::vector<std::string> texts = {
        "alpha beta gamma delta epsilon",
        "alpha beta gamma delta epsilo!",
        "alpha beta gamma delta zeta et",
        "alpha beta gamma other other o",
        "omega psi chi phi upsilon taus",
    };
    for (size_t i = 0; i < texts.size(); ++i) {
        cluster.members.push_back({i + 1, 0});
        cluster.titles.push_back("T");
    }
    cluster.texts = texts;

    size_t previous = SIZE_MAX;
    for (double threshold : {0.5, 0.7, 0.9, 1.0}) {
        size_t surviving = 0;
        for (const MergedCluster& part : second_pass_filter(cluster, threshold, 3))
            surviving += part.members.size();
        if (surviving > previous) {
            ok = false;
            detail << "second pass grew at threshold " << threshold << "; ";
        }
        previous = surviving;
    }

    report(6, "recall model monotone in s/M/K; second pass monotone in threshold",
           ok, detail.str());
}

// ---------------------------------------------------------------------------
// 7. The labeled example clusters classify to their categories.

MergedCluster cluster_of(std::vector<std::string> texts) {
    MergedCluster cluster;
    for (size_t i = 0; i < texts.size(); ++i) {
        cluster.members.push_back({i + 1, 0});
        cluster.titles.push_back("T" + std::to_string(i + 1));
    }
    cluster.texts = std::move(texts);
    return cluster;
}

void criterion_taxonomy() {
    const std::vector<std::string> slotted = {
        "Of the agricultural land 40.4% is used for growing crops and 26.6% is "
        "pastures while 2.2% is used for orchards or vine crops.",
        "Of the agricultural land 26.1% is used for growing crops and 30.2% is "
        "pastures while 3.0% is used for orchards or vine crops.",
        "Of the agricultural land 37.8% is used for growing crops and 35.5% is "
        "pastures while 2.2% is used for orchards or vine crops.",
    };
    const std::string verbatim =
        "Professional organizers help redirect paradigms into more useful "
        "cross-applications that ensure properly co-sustainable futures for their "
        "clients' spaces and processes.";
    const std::vector<std::string> word_swap = {
        "In dry areas it may only emerge from its burrow for a few weeks when "
        "conditions are right and usually at night but in areas with permanent "
        "water bodies and abundant rain it may be active all day.",
        "In dry areas it may only emerge from its burrow for a few weeks when "
        "conditions are right and only at night but in areas with permanent "
        "water bodies and abundant rain it may be active all day.",
    };
    const std::vector<std::string> number_drift = {
        "Bulgaria, a poor rural nation of 7 million people sought to acquire "
        "Macedonia but when it tried it was defeated in 1913 in the Second "
        "Balkan War.",
        "Bulgaria a poor rural nation of 4.5 million people sought to acquire "
        "Macedonia but when it tried it was defeated in 1913 in the Second "
        "Balkan War.",
    };
    const std::vector<std::string> citation = {
        "Komjáth Péter and Vilmos Totik: Problems and Theorems in Classical Set "
        "Theory, Springer-Verlag, Berlin, 2006.",
        "Péter Komjáth, Vilmos Totik: Problems and Theorems in Classical Set "
        "Theory, Springer-Verlag, Berlin, 2006.",
    };
    const std::vector<std::string> truncated = {
        "Army Medical Research Institute of Infectious Diseases (USAMRIID) "
        "microbiologist Bruce E.",
        "Army Medical Research Institute of Infectious Diseases (USAMRIID) which "
        "transitioned from the previous U.S.",
    };

    bool ok = true;
    std::ostringstream detail;
    const auto expect = [&](const std::vector<std::string>& texts, ClusterType want,
                            const char* name) {
        const ClusterType got = classify(cluster_of(texts)).label;
        if (got != want) {
            ok = false;
            detail << name << " labeled " << to_string(got) << "; ";
        }
    };
    expect(slotted, ClusterType::Templates, "slotted triple");
    expect({verbatim, verbatim}, ClusterType::Identical, "verbatim pair");
    expect(word_swap, ClusterType::Copyediting, "word swap");
    expect(number_drift, ClusterType::FactualDrift, "number drift");

    // the remaining two examples need only a deterministic label
    for (const auto& texts : {citation, truncated}) {
        const ClusterType first = classify(cluster_of(texts)).label;
        std::vector<std::string> reversed(texts.rbegin(), texts.rend());
        if (classify(cluster_of(texts)).label != first ||
            classify(cluster_of(reversed)).label != first) {
            ok = false;
            detail << "nondeterministic label; ";
        }
    }
    report(7, "example clusters classify to their categories deterministically",
           ok, detail.str());
}

// ---------------------------------------------------------------------------
// 8. Two identically-configured dedup runs emit byte-identical clusters.

void criterion_determinism() {
    const fs::path scratch =
        fs::temp_directory_path() / ("neardup-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    std::mt19937_64 rng(17);
    const fs::path corpus_path = scratch / "corpus.jsonl";
    {
        std::ofstream out(corpus_path);
        std::vector<std::string> sentences;
        for (int i = 0; i < 1600; ++i)
            sentences.push_back(random_sentence(rng, 150));
        for (int i = 0; i < 400; ++i)  // planted duplicates
            sentences.push_back(sentences[size_t(rng() % 1600)]);
        for (size_t i = 0; i < sentences.size(); ++i) {
            nlohmann::json line;
            line["id"] = i + 1;
            line["title"] = "D" + std::to_string(i + 1);
            line["text"] = sentences[i];
            out << line.dump() << "\n";
        }
    }

    RunConfig config;
    config.input = corpus_path.string();
    config.format = CorpusFormat::JsonLines;
    config.workers = 2;
    config.sort_mem_mb = 1;  // force spill traffic through the external sort

    const auto run = [&](const std::string& name) {
        config.output_dir = (scratch / name).string();
        if (cmd_dedup(config) != 0)
            return std::string();
        std::ifstream in(fs::path(config.output_dir) / "clusters.jsonl",
                         std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return buffer.str();
    };

    const std::string first = run("run_a");
    const std::string second = run("run_b");
    std::ostringstream detail;
    detail << "first run " << first.size() << " bytes, second " << second.size();
    report(8, "identically-configured dedup runs are byte-identical",
           !first.empty() && first == second, detail.str());
    fs::remove_all(scratch);
}

}  // namespace

int main() {
    criterion_recall_formula();
    criterion_collision_probability();
    criterion_planted_recall();
    criterion_union_find_oracle();
    criterion_grouping_oracle();
    criterion_monotonicity();
    criterion_taxonomy();
    criterion_determinism();

    if (failures == 0) {
        std::cout << "all criteria passed\n";
        return 0;
    }
    std::cout << failures << " criteria failed\n";
    return 1;
}
