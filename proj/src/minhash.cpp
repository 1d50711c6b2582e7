#include "neardup/minhash.hpp"

#include "neardup/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace neardup {

namespace detail {

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t uniform_below(std::mt19937_64& rng, uint64_t bound) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

}  // namespace detail

void PipelineParams::validate() const {
    if (shingle_len < 1)
        throw std::invalid_argument("shingle_len must be >= 1");
    if (family_size < 1)
        throw std::invalid_argument("family_size must be >= 1");
    if (sig_len < 1 || sig_len > family_size)
        throw std::invalid_argument("sig_len must satisfy 1 <= sig_len <= family_size");
    if (num_sigs < 1)
        throw std::invalid_argument("num_sigs must be >= 1");
    if (num_sigs > 0xffff)
        throw std::invalid_argument("num_sigs must fit the 2-byte draw index");
    if (hash_bits < 1 || hash_bits > 64)
        throw std::invalid_argument("hash_bits must satisfy 1 <= hash_bits <= 64");
    if (min_shingles > max_shingles)
        throw std::invalid_argument("min_shingles must be <= max_shingles");
}

uint64_t base_hash(std::string_view shingle) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char byte : shingle) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    }
    return h;
}

HashFamily::HashFamily(uint64_t seed, uint32_t family_size, uint32_t hash_bits)
    : seed_(seed), hash_bits_(hash_bits) {
    if (family_size < 1)
        throw std::invalid_argument("family_size must be >= 1");
    if (hash_bits < 1 || hash_bits > 64)
        throw std::invalid_argument("hash_bits must satisfy 1 <= hash_bits <= 64");
    std::mt19937_64 rng(detail::mix64(seed));
    multipliers_.reserve(family_size);
    for (uint32_t i = 0; i < family_size; ++i)
        multipliers_.push_back(rng() | 1);  // odd
}

uint64_t HashFamily::apply(uint32_t i, uint64_t x) const {
    if (i >= multipliers_.size())
        throw std::out_of_range("hash function index " + std::to_string(i) +
                                " out of range [0, " + std::to_string(multipliers_.size()) + ")");
    const uint64_t product = multipliers_[i] * x;  // mod 2^64
    return hash_bits_ == 64 ? product : product >> (64 - hash_bits_);
}

ShingleSet shingle(std::string_view text, uint32_t shingle_len) {
    const std::vector<size_t> offsets = utf8_offsets(text);
    const size_t scalars = offsets.size() - 1;
    if (scalars < shingle_len)
        throw std::invalid_argument("text has " + std::to_string(scalars) +
                                    " scalar values, shorter than shingle length " +
                                    std::to_string(shingle_len));
    ShingleSet set;
    set.elements.reserve(scalars - shingle_len + 1);
    for (size_t i = 0; i + shingle_len <= scalars; ++i) {
        const size_t begin = offsets[i];
        const size_t end = offsets[i + shingle_len];
        set.elements.push_back(base_hash(text.substr(begin, end - begin)));
    }
    std::sort(set.elements.begin(), set.elements.end());
    set.elements.erase(std::unique(set.elements.begin(), set.elements.end()),
                       set.elements.end());
    return set;
}

MinhashVector minhash_vector(const ShingleSet& shingles, const HashFamily& family) {
    if (shingles.empty())
        throw std::invalid_argument("minhash of an empty shingle set");
    MinhashVector out;
    out.minima.assign(family.size(), UINT64_MAX);
    for (uint64_t element : shingles.elements) {
        for (uint32_t i = 0; i < family.size(); ++i)
            out.minima[i] = std::min(out.minima[i], family.apply(i, element));
    }
    return out;
}

SignatureSelections make_selections(const PipelineParams& params) {
    params.validate();
    // A separate stream from the multiplier derivation, so family and draws
    // stay independent for the same seed.
    std::mt19937_64 rng(detail::mix64(params.seed ^ 0x5e1ec7104d5aa9b1ULL));
    SignatureSelections out;
    out.draws.reserve(params.num_sigs);
    std::vector<uint32_t> indices(params.family_size);
    for (uint32_t m = 0; m < params.num_sigs; ++m) {
        for (uint32_t i = 0; i < params.family_size; ++i)
            indices[i] = i;
        // Partial Fisher-Yates: first sig_len entries are a draw without replacement.
        for (uint32_t j = 0; j < params.sig_len; ++j) {
            const uint64_t pick = j + detail::uniform_below(rng, params.family_size - j);
            std::swap(indices[j], indices[pick]);
        }
        out.draws.emplace_back(indices.begin(), indices.begin() + params.sig_len);
    }
    return out;
}

std::vector<Signature> signatures(const MinhashVector& minima,
                                  const SignatureSelections& selections) {
    std::vector<Signature> out;
    out.reserve(selections.draws.size());
    for (size_t m = 0; m < selections.draws.size(); ++m) {
        Signature sig;
        sig.draw_index = static_cast<uint16_t>(m);
        sig.values.reserve(selections.draws[m].size());
        for (uint32_t index : selections.draws[m])
            sig.values.push_back(minima.minima.at(index));
        out.push_back(std::move(sig));
    }
    return out;
}

double jaccard(const ShingleSet& a, const ShingleSet& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("jaccard of an empty shingle set");
    size_t intersection = 0;
    size_t ai = 0, bi = 0;
    while (ai < a.elements.size() && bi < b.elements.size()) {
        if (a.elements[ai] < b.elements[bi]) {
            ++ai;
        } else if (b.elements[bi] < a.elements[ai]) {
            ++bi;
        } else {
            ++intersection;
            ++ai;
            ++bi;
        }
    }
    const size_t unioned = a.elements.size() + b.elements.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(unioned);
}

double expected_recall(double s, uint32_t sig_len, uint32_t num_sigs) {
    if (!(s >= 0.0 && s <= 1.0))
        throw std::invalid_argument("similarity " + std::to_string(s) + " outside [0, 1]");
    return 1.0 - std::pow(1.0 - std::pow(s, double(sig_len)), double(num_sigs));
}

std::vector<RecallPoint> recall_curve(std::span<const uint32_t> sig_lens,
                                      uint32_t num_sigs,
                                      std::span<const double> s_grid) {
    std::vector<RecallPoint> rows;
    rows.reserve(sig_lens.size() * s_grid.size());
    for (uint32_t k : sig_lens)
        for (double s : s_grid)
            rows.push_back({k, s, expected_recall(s, k, num_sigs)});
    return rows;
}

uint64_t estimate_intermediate_volume(const PipelineParams& params,
                                      uint64_t sentence_count) {
    const uint64_t signature_bytes = 2 + uint64_t(params.sig_len) * 8;
    const uint64_t sentence_id_bytes = 12;  // 8-byte doc id + 4-byte index
    return sentence_count * uint64_t(params.num_sigs) * (signature_bytes + sentence_id_bytes);
}

}  // namespace neardup
