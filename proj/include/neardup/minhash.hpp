#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace neardup {

// Tunable knobs for the whole pipeline. Defaults are the settings used
// for full-corpus runs: 12-char shingles, a family of 20 hash functions,
// 10 signatures of 10 minhashes each, 60-bit hash values, and sentences
// kept only when they carry between 75 and 600 shingles.
struct PipelineParams {
    uint32_t shingle_len = 12;
    uint32_t family_size = 20;
    uint32_t sig_len = 10;   // minhashes per signature (K)
    uint32_t num_sigs = 10;  // signatures per sentence (M)
    uint32_t hash_bits = 60;
    uint32_t min_shingles = 75;
    uint32_t max_shingles = 600;
    uint64_t seed = 0;

    // Throws std::invalid_argument naming the violated constraint.
    void validate() const;
};

// 64-bit FNV-1a over the UTF-8 bytes of a shingle. Fixed constants
// (offset 0xcbf29ce484222325, prime 0x100000001b3) so golden files are
// portable across platforms and independent reimplementations.
uint64_t base_hash(std::string_view shingle);

// Family of multiply-shift hash functions F_i(x) = (a_i * x mod 2^64) >> (64 - d)
// with odd multipliers a_i derived deterministically from the seed.
class HashFamily {
  public:
    HashFamily(uint64_t seed, uint32_t family_size, uint32_t hash_bits);

    // Value of function i on x; always < 2^hash_bits.
    // Throws std::out_of_range for i >= size().
    uint64_t apply(uint32_t i, uint64_t x) const;

    uint32_t size() const { return static_cast<uint32_t>(multipliers_.size()); }
    uint32_t hash_bits() const { return hash_bits_; }
    uint64_t seed() const { return seed_; }
    const std::vector<uint64_t>& multipliers() const { return multipliers_; }

  private:
    uint64_t seed_;
    uint32_t hash_bits_;
    std::vector<uint64_t> multipliers_;
};

// Deduplicated base-hash values of a sentence's character n-grams.
struct ShingleSet {
    std::vector<uint64_t> elements;  // sorted, unique

    bool empty() const { return elements.empty(); }
    size_t size() const { return elements.size(); }
};

// All distinct n-gram windows of Unicode scalar values, hashed.
// Windows cross word boundaries; there is no tokenization.
// Throws std::invalid_argument if the text is shorter than shingle_len.
ShingleSet shingle(std::string_view text, uint32_t shingle_len);

// minima[i] = min over the shingle set of F_i applied to each element.
struct MinhashVector {
    std::vector<uint64_t> minima;
};

// Throws std::invalid_argument on an empty shingle set.
MinhashVector minhash_vector(const ShingleSet& shingles, const HashFamily& family);

// The M fixed index draws, each sig_len distinct indices into [0, family_size).
// A pure function of (seed, family_size, sig_len, num_sigs); built once and
// shared corpus-wide so signature equality is meaningful across sentences.
struct SignatureSelections {
    std::vector<std::vector<uint32_t>> draws;
};

SignatureSelections make_selections(const PipelineParams& params);

struct Signature {
    uint16_t draw_index = 0;
    std::vector<uint64_t> values;

    bool operator==(const Signature&) const = default;
};

// Signature m projects the minhash vector through draws[m].
std::vector<Signature> signatures(const MinhashVector& minima,
                                  const SignatureSelections& selections);

// |a ∩ b| / |a ∪ b|. Throws std::invalid_argument if either set is empty.
double jaccard(const ShingleSet& a, const ShingleSet& b);

// P[match] = 1 - (1 - s^K)^M for shingle-set Jaccard similarity s.
// Throws std::invalid_argument for s outside [0, 1].
double expected_recall(double s, uint32_t sig_len, uint32_t num_sigs);

struct RecallPoint {
    uint32_t sig_len;
    double similarity;
    double p_match;
};

// expected_recall evaluated pointwise over every (K, s) combination,
// in K-major order. Emitted as CSV by the tune subcommand.
std::vector<RecallPoint> recall_curve(std::span<const uint32_t> sig_lens,
                                      uint32_t num_sigs,
                                      std::span<const double> s_grid);

// Planning estimate of the map stage's intermediate data: one serialized
// (signature key, sentence id) record per signature per sentence, using the
// grouping wire format (2-byte draw index, sig_len 8-byte values, 12-byte
// sentence id).
uint64_t estimate_intermediate_volume(const PipelineParams& params,
                                      uint64_t sentence_count);

namespace detail {

// splitmix64 finalizer; used to derive independent engine seeds.
uint64_t mix64(uint64_t x);

// Unbiased draw from [0, bound) via rejection sampling, so results do not
// depend on the standard library's distribution implementations.
uint64_t uniform_below(std::mt19937_64& rng, uint64_t bound);

}  // namespace detail

}  // namespace neardup
