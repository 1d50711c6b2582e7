#include "neardup/clusters.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace neardup {

uint32_t UnionFind::intern(const SentenceId& id) {
    const auto [it, inserted] = index_.try_emplace(id, static_cast<uint32_t>(ids_.size()));
    if (inserted) {
        ids_.push_back(id);
        parent_.push_back(it->second);
    }
    return it->second;
}

uint32_t UnionFind::find(uint32_t node) {
    uint32_t root = node;
    while (parent_[root] != root)
        root = parent_[root];
    while (parent_[node] != root) {  // path compression
        const uint32_t next = parent_[node];
        parent_[node] = root;
        node = next;
    }
    return root;
}

void UnionFind::unite(uint32_t a, uint32_t b) {
    const uint32_t ra = find(a);
    const uint32_t rb = find(b);
    if (ra != rb)
        parent_[ra] = rb;  // point one head at the other
}

void ClusterMerger::add(const RawCluster& raw) {
    if (raw.members.empty())
        return;
    const uint32_t head = forest_.intern(raw.members.front());
    for (size_t i = 1; i < raw.members.size(); ++i)
        forest_.unite(head, forest_.intern(raw.members[i]));
}

std::vector<MergedCluster> ClusterMerger::finish() {
    std::unordered_map<uint32_t, uint32_t> component_of_root;
    std::vector<MergedCluster> out;
    for (uint32_t node = 0; node < forest_.node_count(); ++node) {
        const uint32_t root = forest_.find(node);
        const auto [it, inserted] =
            component_of_root.try_emplace(root, static_cast<uint32_t>(out.size()));
        if (inserted)
            out.emplace_back();
        out[it->second].members.push_back(forest_.ids()[node]);
    }
    std::erase_if(out, [](const MergedCluster& c) { return c.members.size() < 2; });
    for (MergedCluster& cluster : out)
        std::sort(cluster.members.begin(), cluster.members.end());
    std::sort(out.begin(), out.end(), [](const MergedCluster& a, const MergedCluster& b) {
        return a.members.front() < b.members.front();
    });
    for (size_t i = 0; i < out.size(); ++i)
        out[i].cluster_id = i;
    return out;
}

std::vector<MergedCluster> merge_clusters(const std::vector<RawCluster>& raw) {
    ClusterMerger merger;
    for (const RawCluster& cluster : raw)
        merger.add(cluster);
    return merger.finish();
}

void reconstruct(std::vector<MergedCluster>& clusters,
                 const DocumentSource& source,
                 const PipelineParams& params) {
    struct Slot {
        size_t cluster;
        size_t member;
    };
    std::unordered_map<SentenceId, Slot> wanted;
    std::unordered_set<uint64_t> wanted_docs;
    for (size_t c = 0; c < clusters.size(); ++c) {
        clusters[c].texts.assign(clusters[c].members.size(), {});
        clusters[c].titles.assign(clusters[c].members.size(), {});
        for (size_t m = 0; m < clusters[c].members.size(); ++m) {
            wanted.emplace(clusters[c].members[m], Slot{c, m});
            wanted_docs.insert(clusters[c].members[m].doc_id);
        }
    }
    if (wanted.empty())
        return;  // nothing to fill; the corpus is not read

    size_t missing = wanted.size();
    // Filter + strip must mirror prepare_articles so sentence indices match
    // the mapping pass; stripping happens after the wanted_docs skip only
    // because unchunked documents cannot affect indices.
    const auto stream = filter_articles(source.open());
    while (auto doc = stream->next()) {
        if (!wanted_docs.count(doc->doc_id))
            continue;
        doc->body = strip_markup(doc->body);
        for (const SentenceRecord& sentence : chunk_sentences(*doc, params)) {
            const auto it = wanted.find(sentence.id);
            if (it == wanted.end())
                continue;
            MergedCluster& cluster = clusters[it->second.cluster];
            cluster.texts[it->second.member] = sentence.text;
            cluster.titles[it->second.member] = doc->title;
            wanted.erase(it);
            if (--missing == 0)
                return;
        }
    }
    const SentenceId& absent = wanted.begin()->first;
    throw std::runtime_error("sentence " + std::to_string(absent.doc_id) + ":" +
                             std::to_string(absent.index) +
                             " not found in corpus (input drifted since the pipeline run)");
}

std::vector<MergedCluster> second_pass_filter(const MergedCluster& cluster,
                                              double threshold,
                                              uint32_t shingle_len) {
    if (!cluster.has_texts())
        throw std::invalid_argument("second_pass_filter requires reconstructed texts");
    const size_t n = cluster.members.size();
    std::vector<ShingleSet> sets;
    sets.reserve(n);
    for (const std::string& text : cluster.texts)
        sets.push_back(shingle(text, shingle_len));

    // Components of the threshold graph, via a small local union-find.
    std::vector<size_t> parent(n);
    for (size_t i = 0; i < n; ++i)
        parent[i] = i;
    const auto find = [&](size_t x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            if (jaccard(sets[i], sets[j]) >= threshold)
                parent[find(i)] = find(j);

    std::unordered_map<size_t, std::vector<size_t>> groups;
    for (size_t i = 0; i < n; ++i)
        groups[find(i)].push_back(i);

    std::vector<MergedCluster> out;
    for (auto& [root, indices] : groups) {
        if (indices.size() < 2)
            continue;
        std::sort(indices.begin(), indices.end());  // members are presorted
        MergedCluster part;
        for (size_t i : indices) {
            part.members.push_back(cluster.members[i]);
            part.texts.push_back(cluster.texts[i]);
            if (i < cluster.titles.size())
                part.titles.push_back(cluster.titles[i]);
        }
        out.push_back(std::move(part));
    }
    std::sort(out.begin(), out.end(), [](const MergedCluster& a, const MergedCluster& b) {
        return a.members.front() < b.members.front();
    });
    for (size_t i = 0; i < out.size(); ++i)
        out[i].cluster_id = i;
    return out;
}

std::vector<MergedCluster> second_pass_filter_all(const std::vector<MergedCluster>& clusters,
                                                  double threshold,
                                                  uint32_t shingle_len) {
    std::vector<MergedCluster> out;
    for (const MergedCluster& cluster : clusters)
        for (MergedCluster& part : second_pass_filter(cluster, threshold, shingle_len))
            out.push_back(std::move(part));
    std::sort(out.begin(), out.end(), [](const MergedCluster& a, const MergedCluster& b) {
        return a.members.front() < b.members.front();
    });
    for (size_t i = 0; i < out.size(); ++i)
        out[i].cluster_id = i;
    return out;
}

uint64_t histogram_bucket(uint64_t size) {
    if (size <= 16)
        return size;
    uint64_t bucket = 32;
    while (bucket < size)
        bucket <<= 1;
    return bucket;
}

ClusterStats compute_stats(const std::vector<MergedCluster>& clusters) {
    ClusterStats stats;
    std::unordered_set<uint64_t> articles;
    std::unordered_set<std::string> distinct_texts;
    std::unordered_set<SentenceId> distinct_ids;
    bool all_have_texts = !clusters.empty();
    uint64_t clusters_le_10 = 0;
    uint64_t pairs_gt_10 = 0;

    for (const MergedCluster& cluster : clusters) {
        const uint64_t size = cluster.members.size();
        ++stats.cluster_count;
        stats.sentence_pair_count += size;
        ++stats.size_histogram[histogram_bucket(size)];
        if (size <= 10)
            ++clusters_le_10;
        else
            pairs_gt_10 += size;
        all_have_texts = all_have_texts && cluster.has_texts();
        for (const SentenceId& id : cluster.members) {
            articles.insert(id.doc_id);
            distinct_ids.insert(id);
        }
        if (cluster.has_texts())
            for (const std::string& text : cluster.texts)
                distinct_texts.insert(text);
    }

    stats.distinct_article_count = articles.size();
    stats.distinct_sentence_count =
        all_have_texts ? distinct_texts.size() : distinct_ids.size();
    if (stats.cluster_count > 0)
        stats.fraction_clusters_le_10 =
            static_cast<double>(clusters_le_10) / static_cast<double>(stats.cluster_count);
    if (stats.sentence_pair_count > 0)
        stats.fraction_pairs_gt_10 =
            static_cast<double>(pairs_gt_10) / static_cast<double>(stats.sentence_pair_count);
    return stats;
}

// ---------------------------------------------------------------------------
// Serialization

std::string cluster_to_json_line(const MergedCluster& cluster) {
    nlohmann::ordered_json line;
    line["cluster_id"] = cluster.cluster_id;
    nlohmann::ordered_json members = nlohmann::json::array();
    for (size_t i = 0; i < cluster.members.size(); ++i) {
        nlohmann::ordered_json member;
        member["doc"] = cluster.members[i].doc_id;
        member["idx"] = cluster.members[i].index;
        if (i < cluster.titles.size())
            member["title"] = cluster.titles[i];
        if (i < cluster.texts.size())
            member["text"] = cluster.texts[i];
        members.push_back(std::move(member));
    }
    line["members"] = std::move(members);
    return line.dump();
}

void write_clusters_jsonl(std::ostream& out, const std::vector<MergedCluster>& clusters) {
    for (const MergedCluster& cluster : clusters)
        out << cluster_to_json_line(cluster) << '\n';
}

std::vector<MergedCluster> read_clusters_jsonl(std::istream& in) {
    std::vector<MergedCluster> out;
    std::string line;
    uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        const nlohmann::json parsed = nlohmann::json::parse(line, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("members") ||
            !parsed["members"].is_array())
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": not a cluster object");
        MergedCluster cluster;
        cluster.cluster_id = parsed.value("cluster_id", uint64_t{out.size()});
        for (const nlohmann::json& member : parsed["members"]) {
            if (!member.is_object() || !member.contains("doc") || !member.contains("idx"))
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": member missing doc/idx");
            cluster.members.push_back({member["doc"].get<uint64_t>(),
                                       member["idx"].get<uint32_t>()});
            cluster.titles.push_back(member.value("title", std::string{}));
            cluster.texts.push_back(member.value("text", std::string{}));
        }
        const bool any_text =
            std::any_of(cluster.texts.begin(), cluster.texts.end(),
                        [](const std::string& text) { return !text.empty(); });
        if (!any_text) {
            cluster.texts.clear();
            cluster.titles.clear();
        }
        out.push_back(std::move(cluster));
    }
    return out;
}

std::string stats_to_json(const ClusterStats& stats) {
    nlohmann::ordered_json doc;
    doc["cluster_count"] = stats.cluster_count;
    doc["sentence_pair_count"] = stats.sentence_pair_count;
    doc["distinct_article_count"] = stats.distinct_article_count;
    doc["distinct_sentence_count"] = stats.distinct_sentence_count;
    doc["fraction_clusters_le_10"] = stats.fraction_clusters_le_10;
    doc["fraction_pairs_gt_10"] = stats.fraction_pairs_gt_10;
    nlohmann::ordered_json histogram = nlohmann::ordered_json::object();
    for (const auto& [bucket, count] : stats.size_histogram)
        histogram[std::to_string(bucket)] = count;
    doc["size_histogram"] = std::move(histogram);
    return doc.dump(2) + "\n";
}

void write_histogram_tsv(std::ostream& out, const ClusterStats& stats) {
    for (const auto& [bucket, count] : stats.size_histogram)
        out << bucket << '\t' << count << '\n';
}

}  // namespace neardup
