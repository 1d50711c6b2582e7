#include "neardup/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace neardup {

const char* to_string(ClusterType type) {
    switch (type) {
        case ClusterType::Templates: return "Templates";
        case ClusterType::Identical: return "Identical";
        case ClusterType::Copyediting: return "Copyediting";
        case ClusterType::FactualDrift: return "FactualDrift";
        case ClusterType::References: return "References";
        case ClusterType::Other: return "Other";
    }
    return "Other";
}

namespace {

std::vector<std::string_view> tokenize(std::string_view text) {
    std::vector<std::string_view> tokens;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t'))
            ++i;
        const size_t start = i;
        while (i < text.size() && text[i] != ' ' && text[i] != '\t')
            ++i;
        if (i > start)
            tokens.push_back(text.substr(start, i - start));
    }
    return tokens;
}

bool is_numeric_token(std::string_view token) {
    return std::any_of(token.begin(), token.end(), [](char c) {
        return (c >= '0' && c <= '9') || c == '%';
    });
}

// Named-entity-like: the first ASCII letter in the token is uppercase.
bool is_entity_token(std::string_view token) {
    for (char c : token) {
        if (c >= 'A' && c <= 'Z')
            return true;
        if (c >= 'a' && c <= 'z')
            return false;
    }
    return false;
}

// Token-level LCS alignment of one sentence pair, and the tokens left outside it.
struct PairAlignment {
    double frame_share = 0.0;       // lcs / max(|a|, |b|)
    bool numeric_diff = false;      // any differing token carries a digit or '%'
    bool non_slot_diff = false;     // any differing token is neither numeric nor entity-like
    size_t diff_count = 0;
};

PairAlignment align_pair(const std::vector<std::string_view>& a,
                         const std::vector<std::string_view>& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<std::vector<uint32_t>> lcs(n + 1, std::vector<uint32_t>(m + 1, 0));
    for (size_t i = n; i-- > 0;)
        for (size_t j = m; j-- > 0;)
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1
                                     : std::max(lcs[i + 1][j], lcs[i][j + 1]);

    PairAlignment out;
    const size_t longest = std::max(n, m);
    out.frame_share = longest == 0 ? 1.0
                                   : static_cast<double>(lcs[0][0]) /
                                         static_cast<double>(longest);

    // Walk one canonical alignment path; off-path tokens are the differences.
    const auto note_diff = [&](std::string_view token) {
        ++out.diff_count;
        if (is_numeric_token(token))
            out.numeric_diff = true;
        else if (!is_entity_token(token))
            out.non_slot_diff = true;
    };
    size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (a[i] == b[j]) {
            ++i;
            ++j;
        } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
            note_diff(a[i++]);
        } else {
            note_diff(b[j++]);
        }
    }
    while (i < n)
        note_diff(a[i++]);
    while (j < m)
        note_diff(b[j++]);
    return out;
}

// Citation shape: a standalone 4-digit run plus at least two comma-separated
// segments whose first letter is uppercase.
bool looks_like_citation(std::string_view text) {
    bool has_year = false;
    int digits = 0;
    for (size_t i = 0; i <= text.size(); ++i) {
        const bool digit = i < text.size() && text[i] >= '0' && text[i] <= '9';
        if (digit) {
            ++digits;
        } else {
            if (digits == 4)
                has_year = true;
            digits = 0;
        }
    }
    if (!has_year)
        return false;

    int capitalized_segments = 0;
    size_t start = 0;
    for (size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ',') {
            const std::string_view segment = text.substr(start, i - start);
            for (char c : segment) {
                if (c >= 'A' && c <= 'Z') {
                    ++capitalized_segments;
                    break;
                }
                if (c >= 'a' && c <= 'z')
                    break;
            }
            start = i + 1;
        }
    }
    return capitalized_segments >= 2;
}

std::string format_share(double value) {
    std::ostringstream out;
    out.precision(2);
    out << std::fixed << value;
    return out.str();
}

}  // namespace

ClusterLabel classify(const MergedCluster& cluster, const TaxonomyConfig& config) {
    if (!cluster.has_texts() || cluster.members.size() < 2)
        throw std::invalid_argument("classify requires texts and at least 2 members");

    // Sort texts so the outcome cannot depend on member ordering.
    std::vector<std::string> texts(cluster.texts);
    std::sort(texts.begin(), texts.end());

    const size_t size = texts.size();

    if (std::all_of(texts.begin(), texts.end(),
                    [&](const std::string& text) { return text == texts.front(); }))
        return {ClusterType::Identical,
                "all " + std::to_string(size) + " texts byte-equal"};

    uint32_t citations = 0;
    for (const std::string& text : texts)
        citations += looks_like_citation(text);
    if (citations >= config.references_min_matches)
        return {ClusterType::References,
                std::to_string(citations) + " of " + std::to_string(size) +
                    " texts citation-shaped (4-digit year, >=2 capitalized comma segments)"};

    // Pairwise alignments over a bounded member prefix.
    const size_t considered = std::min<size_t>(size, config.max_pair_members);
    std::vector<std::vector<std::string_view>> tokens;
    tokens.reserve(considered);
    for (size_t i = 0; i < considered; ++i)
        tokens.push_back(tokenize(texts[i]));

    double min_share = 1.0;
    bool all_framed = true;
    bool any_numeric_diff = false;
    bool any_non_slot_diff = false;
    double max_diff_ratio = 0.0;
    bool numeric_diff_in_framed_pair = false;
    for (size_t i = 0; i < considered; ++i) {
        for (size_t j = i + 1; j < considered; ++j) {
            const PairAlignment pair = align_pair(tokens[i], tokens[j]);
            min_share = std::min(min_share, pair.frame_share);
            const bool framed = pair.frame_share >= config.frame_share_min;
            all_framed = all_framed && framed;
            any_numeric_diff = any_numeric_diff || pair.numeric_diff;
            any_non_slot_diff = any_non_slot_diff || pair.non_slot_diff;
            max_diff_ratio = std::max(max_diff_ratio, 1.0 - pair.frame_share);
            numeric_diff_in_framed_pair =
                numeric_diff_in_framed_pair || (framed && pair.numeric_diff);
        }
    }

    if (size >= config.templates_min_members && all_framed && !any_non_slot_diff)
        return {ClusterType::Templates,
                std::to_string(size) + " members share a frame (min share " +
                    format_share(min_share) + "), differences confined to numeric/entity slots"};

    if (numeric_diff_in_framed_pair)
        return {ClusterType::FactualDrift,
                "numeric tokens differ inside a shared frame (min share " +
                    format_share(min_share) + ")"};

    if (all_framed && !any_numeric_diff && max_diff_ratio <= config.copyedit_max_diff_ratio)
        return {ClusterType::Copyediting,
                "non-numeric edits inside a shared frame (diff ratio " +
                    format_share(max_diff_ratio) + ")"};

    return {ClusterType::Other,
            "no rule matched (min frame share " + format_share(min_share) + ")"};
}

std::vector<LabelCount> tabulate(const std::vector<ClusterLabel>& labels) {
    static constexpr ClusterType kOrder[kClusterTypeCount] = {
        ClusterType::Templates,  ClusterType::Identical,  ClusterType::Copyediting,
        ClusterType::FactualDrift, ClusterType::References, ClusterType::Other,
    };
    std::vector<LabelCount> table;
    table.reserve(kClusterTypeCount);
    for (ClusterType type : kOrder)
        table.push_back({type, 0, 0.0});
    for (const ClusterLabel& label : labels)
        for (LabelCount& row : table)
            if (row.label == label.label)
                ++row.count;
    if (!labels.empty())
        for (LabelCount& row : table)
            row.fraction = static_cast<double>(row.count) /
                           static_cast<double>(labels.size());
    return table;
}

std::string format_label_table(const std::vector<LabelCount>& table) {
    std::ostringstream out;
    out << "category      count  fraction\n";
    for (const LabelCount& row : table) {
        std::string name = to_string(row.label);
        name.resize(12, ' ');
        out << name << ' ';
        std::string count = std::to_string(row.count);
        out << std::string(6 - std::min<size_t>(6, count.size()), ' ') << count << "  ";
        out.precision(1);
        out << std::fixed << row.fraction * 100.0 << "%\n";
    }
    return out.str();
}

std::vector<MergedCluster> sample_clusters(const std::vector<MergedCluster>& clusters,
                                           size_t k, uint64_t seed) {
    if (k > clusters.size())
        throw std::invalid_argument("sample of " + std::to_string(k) + " from " +
                                    std::to_string(clusters.size()) + " clusters");
    std::vector<size_t> indices(clusters.size());
    std::iota(indices.begin(), indices.end(), size_t{0});
    std::mt19937_64 rng(detail::mix64(seed));
    for (size_t i = 0; i < k; ++i) {
        const size_t pick =
            i + detail::uniform_below(rng, indices.size() - i);
        std::swap(indices[i], indices[pick]);
    }
    indices.resize(k);
    std::sort(indices.begin(), indices.end());  // keep original order
    std::vector<MergedCluster> out;
    out.reserve(k);
    for (size_t index : indices)
        out.push_back(clusters[index]);
    return out;
}

}  // namespace neardup
