#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "neardup/taxonomy.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace neardup;

namespace {

MergedCluster cluster_of(std::vector<std::string> texts) {
    MergedCluster cluster;
    for (size_t i = 0; i < texts.size(); ++i) {
        cluster.members.push_back({i + 1, 0});
        cluster.titles.push_back("T" + std::to_string(i + 1));
    }
    cluster.texts = std::move(texts);
    return cluster;
}

// Observed cluster texts used as classification fixtures, one per category.
const std::vector<std::string> kSlottedTriple = {
    "Of the agricultural land 40.4% is used for growing crops and 26.6% is "
    "pastures while 2.2% is used for orchards or vine crops.",
    "Of the agricultural land 26.1% is used for growing crops and 30.2% is "
    "pastures while 3.0% is used for orchards or vine crops.",
    "Of the agricultural land 37.8% is used for growing crops and 35.5% is "
    "pastures while 2.2% is used for orchards or vine crops.",
};

const std::string kVerbatim =
    "Professional organizers help redirect paradigms into more useful "
    "cross-applications that ensure properly co-sustainable futures for their "
    "clients' spaces and processes.";

const std::vector<std::string> kWordSwapPair = {
    "In dry areas it may only emerge from its burrow for a few weeks when "
    "conditions are right and usually at night but in areas with permanent "
    "water bodies and abundant rain it may be active all day.",
    "In dry areas it may only emerge from its burrow for a few weeks when "
    "conditions are right and only at night but in areas with permanent "
    "water bodies and abundant rain it may be active all day.",
};

const std::vector<std::string> kNumberDriftPair = {
    "Bulgaria, a poor rural nation of 7 million people sought to acquire "
    "Macedonia but when it tried it was defeated in 1913 in the Second "
    "Balkan War.",
    "Bulgaria a poor rural nation of 4.5 million people sought to acquire "
    "Macedonia but when it tried it was defeated in 1913 in the Second "
    "Balkan War.",
};

const std::vector<std::string> kCitationPair = {
    "Komjáth Péter and Vilmos Totik: Problems and Theorems in Classical Set "
    "Theory, Springer-Verlag, Berlin, 2006.",
    "Péter Komjáth, Vilmos Totik: Problems and Theorems in Classical Set "
    "Theory, Springer-Verlag, Berlin, 2006.",
};

const std::vector<std::string> kTruncatedPair = {
    "Army Medical Research Institute of Infectious Diseases (USAMRIID) "
    "microbiologist Bruce E.",
    "Army Medical Research Institute of Infectious Diseases (USAMRIID) which "
    "transitioned from the previous U.S.",
};

}  // namespace

TEST_CASE("labels have stable names") {
    CHECK(std::string(to_string(ClusterType::Templates)) == "Templates");
    CHECK(std::string(to_string(ClusterType::Identical)) == "Identical");
    CHECK(std::string(to_string(ClusterType::Copyediting)) == "Copyediting");
    CHECK(std::string(to_string(ClusterType::FactualDrift)) == "FactualDrift");
    CHECK(std::string(to_string(ClusterType::References)) == "References");
    CHECK(std::string(to_string(ClusterType::Other)) == "Other");
}

TEST_CASE("a percent-slotted triple classifies as Templates") {
    const ClusterLabel label = classify(cluster_of(kSlottedTriple));
    CHECK(label.label == ClusterType::Templates);
    CHECK_FALSE(label.evidence.empty());
}

TEST_CASE("byte-identical texts classify as Identical") {
    const ClusterLabel label = classify(cluster_of({kVerbatim, kVerbatim}));
    CHECK(label.label == ClusterType::Identical);
}

TEST_CASE("a single-word swap classifies as Copyediting") {
    const ClusterLabel label = classify(cluster_of(kWordSwapPair));
    CHECK(label.label == ClusterType::Copyediting);
}

TEST_CASE("a framed numeric change classifies as FactualDrift") {
    const ClusterLabel label = classify(cluster_of(kNumberDriftPair));
    CHECK(label.label == ClusterType::FactualDrift);
}

TEST_CASE("citation-shaped texts classify as References") {
    const ClusterLabel label = classify(cluster_of(kCitationPair));
    CHECK(label.label == ClusterType::References);
}

TEST_CASE("differently-truncated texts classify as Other") {
    const ClusterLabel label = classify(cluster_of(kTruncatedPair));
    CHECK(label.label == ClusterType::Other);
}

TEST_CASE("classification is invariant to member order") {
    for (const auto& texts : {kSlottedTriple, kWordSwapPair, kNumberDriftPair,
                              kCitationPair, kTruncatedPair}) {
        const ClusterType expected = classify(cluster_of(texts)).label;
        std::vector<std::string> reversed(texts.rbegin(), texts.rend());
        CHECK(classify(cluster_of(reversed)).label == expected);
        if (texts.size() >= 3) {
            std::vector<std::string> rotated(texts.begin() + 1, texts.end());
            rotated.push_back(texts.front());
            CHECK(classify(cluster_of(rotated)).label == expected);
        }
    }
}

TEST_CASE("Identical demands equality of every member") {
    CHECK(classify(cluster_of({"same text here", "same text here", "same text here"}))
              .label == ClusterType::Identical);
    CHECK(classify(cluster_of({"same text here", "same text here", "same text her"}))
              .label != ClusterType::Identical);
}

TEST_CASE("Identical outranks every other rule") {
    // identical citation-shaped texts are still Identical
    const ClusterLabel label =
        classify(cluster_of({kCitationPair[0], kCitationPair[0]}));
    CHECK(label.label == ClusterType::Identical);
}

TEST_CASE("classify is total on arbitrary text clusters") {
    std::mt19937_64 rng(5150);
    const std::vector<std::string> words = {"Alpha", "beta",  "42",   "7%",
                                            "War.",  "1913",  "x,",   "of",
                                            "the",   "Zeta,", "9.5",  "end."};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::string> texts;
        const size_t size = 2 + rng() % 4;
        for (size_t t = 0; t < size; ++t) {
            std::string text;
            const size_t length = 1 + rng() % 12;
            for (size_t w = 0; w < length; ++w)
                text += std::string(words[rng() % words.size()]) + " ";
            texts.push_back(text);
        }
        const ClusterLabel label = classify(cluster_of(texts));
        CHECK(int(label.label) >= 0);
        CHECK(int(label.label) < kClusterTypeCount);
        CHECK_FALSE(label.evidence.empty());
    }
}

TEST_CASE("classify rejects clusters without texts or too small") {
    MergedCluster bare;
    bare.members = {{1, 0}, {2, 0}};
    CHECK_THROWS_AS(classify(bare), std::invalid_argument);

    CHECK_THROWS_AS(classify(cluster_of({"only one"})), std::invalid_argument);
}

TEST_CASE("tabulate lists all six labels in fixed order") {
    const auto table = tabulate({});
    REQUIRE(table.size() == kClusterTypeCount);
    CHECK(table[0].label == ClusterType::Templates);
    CHECK(table[1].label == ClusterType::Identical);
    CHECK(table[2].label == ClusterType::Copyediting);
    CHECK(table[3].label == ClusterType::FactualDrift);
    CHECK(table[4].label == ClusterType::References);
    CHECK(table[5].label == ClusterType::Other);
    for (const auto& row : table) {
        CHECK(row.count == 0);
        CHECK(row.fraction == 0.0);
    }
}

TEST_CASE("tabulate counts and normalizes") {
    const std::vector<ClusterLabel> labels = {
        {ClusterType::Identical, ""}, {ClusterType::Identical, ""},
        {ClusterType::Other, ""}};
    const auto table = tabulate(labels);
    CHECK(table[1].count == 2);
    CHECK(table[1].fraction == doctest::Approx(2.0 / 3.0));
    CHECK(table[5].count == 1);
    CHECK(table[5].fraction == doctest::Approx(1.0 / 3.0));
    CHECK(table[0].count == 0);
    CHECK(table[0].fraction == 0.0);

    double total = 0.0;
    for (const auto& row : table)
        total += row.fraction;
    CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("tabulate matches a manual recount on labeled fixtures") {
    std::vector<ClusterLabel> labels;
    std::map<ClusterType, uint64_t> expected;
    std::mt19937_64 rng(246);
    for (int i = 0; i < 30; ++i) {
        const auto type = static_cast<ClusterType>(rng() % kClusterTypeCount);
        labels.push_back({type, "r"});
        ++expected[type];
    }
    for (const auto& row : tabulate(labels))
        CHECK(row.count == expected[row.label]);
}

TEST_CASE("the label table has the fixed header and row shape") {
    const auto table = tabulate({{ClusterType::Identical, ""}});
    const std::string text = format_label_table(table);
    CHECK(text.find("category      count  fraction\n") == 0);
    CHECK(text.find("Identical         1  100.0%\n") != std::string::npos);
    CHECK(text.find("Templates         0  0.0%\n") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);  // header + 6 rows
}

TEST_CASE("sampling all clusters returns them in original order") {
    std::vector<MergedCluster> clusters;
    for (uint64_t i = 0; i < 8; ++i) {
        MergedCluster cluster;
        cluster.cluster_id = i;
        cluster.members = {{i, 0}, {i, 1}};
        clusters.push_back(std::move(cluster));
    }
    const auto sampled = sample_clusters(clusters, clusters.size(), 9);
    REQUIRE(sampled.size() == clusters.size());
    for (size_t i = 0; i < sampled.size(); ++i)
        CHECK(sampled[i].cluster_id == i);
}

TEST_CASE("sampling is deterministic per seed") {
    std::vector<MergedCluster> clusters(20);
    for (uint64_t i = 0; i < clusters.size(); ++i)
        clusters[i].cluster_id = i;

    const auto a = sample_clusters(clusters, 5, 42);
    const auto b = sample_clusters(clusters, 5, 42);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].cluster_id == b[i].cluster_id);

    // clusters come back in original relative order
    for (size_t i = 1; i < a.size(); ++i)
        CHECK(a[i - 1].cluster_id < a[i].cluster_id);
}

TEST_CASE("oversampling throws") {
    std::vector<MergedCluster> clusters(3);
    CHECK_THROWS_AS(sample_clusters(clusters, 4, 1), std::invalid_argument);
}

TEST_CASE("single draws are uniform across seeds") {
    std::vector<MergedCluster> clusters(10);
    for (uint64_t i = 0; i < clusters.size(); ++i)
        clusters[i].cluster_id = i;

    std::map<uint64_t, int> hits;
    const int draws = 10000;
    for (int seed = 0; seed < draws; ++seed)
        ++hits[sample_clusters(clusters, 1, uint64_t(seed)).front().cluster_id];
    for (const auto& [id, count] : hits) {
        CHECK(count > 800);
        CHECK(count < 1200);
    }
}
