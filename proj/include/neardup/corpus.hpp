#pragma once

#include "neardup/minhash.hpp"

#include <compare>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace neardup {

struct Document {
    uint64_t doc_id = 0;
    std::string title;
    std::string body;
    int ns = 0;  // MediaWiki namespace code; 0 for plain-text sources
    bool is_redirect = false;
};

// Stable sentence identity: document id plus 0-based sentence index.
struct SentenceId {
    uint64_t doc_id = 0;
    uint32_t index = 0;

    auto operator<=>(const SentenceId&) const = default;
};

struct SentenceRecord {
    SentenceId id;
    std::string text;
    uint32_t char_length = 0;  // Unicode scalar values, not bytes
};

// Number of Unicode scalar values in UTF-8 text. Each invalid byte
// counts as one scalar so the result is total and deterministic.
size_t utf8_length(std::string_view text);

// Byte offset of each scalar value's first byte, with text.size() appended,
// so scalar window [i, i+n) spans bytes [offsets[i], offsets[i+n]).
std::vector<size_t> utf8_offsets(std::string_view text);

// Removes wiki markup: {{...}} templates (nesting-aware), <ref>...</ref>
// spans, XML comments, {|...|} table blocks, bold/italic quote runs; rewrites
// [[target|anchor]] to anchor and [[target]] to target. Unbalanced markup is
// dropped to end-of-construct or end-of-text. Idempotent.
std::string strip_markup(std::string_view body);

// Splits the markup-stripped body into sentences and applies the shingle-count
// length filter: a sentence survives iff
//   min_shingles <= char_length - shingle_len + 1 <= max_shingles.
// The boundary rule splits after '.', '!' or '?' followed by whitespace and an
// uppercase letter, or at end of text. Whitespace runs are collapsed to single
// spaces first, so sentence text never contains line breaks. Every pre-filter
// sentence consumes an index; filtered ones leave gaps.
std::vector<SentenceRecord> chunk_sentences(const Document& doc,
                                            const PipelineParams& params);

// Lazy document sequence; next() yields documents in input order.
class DocumentStream {
  public:
    virtual ~DocumentStream() = default;
    virtual std::optional<Document> next() = 0;
};

// Streaming parser for MediaWiki XML exports: one Document per <page>,
// reading <title>, <ns>, <id>, <redirect/> and the first <revision><text>.
// Memory use is bounded by the largest page, never the whole file.
// Malformed XML raises std::runtime_error naming the byte offset; a page
// missing a required child raises naming the page title or ordinal.
class MediaWikiDumpParser final : public DocumentStream {
  public:
    explicit MediaWikiDumpParser(std::istream& in);
    std::optional<Document> next() override;

    struct Scanner;  // implementation detail, defined in corpus.cpp

  private:
    std::shared_ptr<Scanner> scan_;
};

// One Document per input line, each an object {"id":…, "title":…, "text":…}.
// Unparsable lines raise naming the line number; duplicate ids raise naming
// the id. Yields namespace 0, is_redirect false.
class JsonLinesParser final : public DocumentStream {
  public:
    explicit JsonLinesParser(std::istream& in);
    std::optional<Document> next() override;

  private:
    std::istream* in_;
    uint64_t line_no_ = 0;
    std::unordered_set<uint64_t> seen_ids_;
};

// True for mainspace, non-redirect pages.
bool is_article(const Document& doc);

// Streaming filter retaining only articles.
std::unique_ptr<DocumentStream> filter_articles(std::unique_ptr<DocumentStream> docs);

// Eager variant for small inputs.
std::vector<Document> filter_articles(std::vector<Document> docs);

// filter_articles followed by strip_markup on every body. Every
// sentence-producing consumer (mapping, ingest dumps, reconstruction) must
// read through this adapter so sentence indices agree across passes.
std::unique_ptr<DocumentStream> prepare_articles(std::unique_ptr<DocumentStream> docs);

enum class CorpusFormat {
    MediaWikiXml,  // export XML, optionally bz2-compressed (magic-sniffed)
    JsonLines,
    TextFiles,     // one document per file; a directory yields one per regular file
};

const char* to_string(CorpusFormat format);
std::optional<CorpusFormat> corpus_format_from_string(std::string_view name);

// A corpus that can be opened any number of times, each open yielding the
// identical document sequence. The pipeline reads it once for mapping and
// once more for sentence reconstruction.
class DocumentSource {
  public:
    virtual ~DocumentSource() = default;
    virtual std::unique_ptr<DocumentStream> open() const = 0;
};

// File-backed source for the given format. For MediaWikiXml the file may be
// bz2-compressed; compression is detected by magic bytes at open time.
std::unique_ptr<DocumentSource> make_file_source(std::string path, CorpusFormat format);

// In-memory source, mainly for tests and small experiments.
class MemoryCorpus final : public DocumentSource {
  public:
    explicit MemoryCorpus(std::vector<Document> docs) : docs_(std::move(docs)) {}
    std::unique_ptr<DocumentStream> open() const override;

  private:
    std::vector<Document> docs_;
};

}  // namespace neardup

template <>
struct std::hash<neardup::SentenceId> {
    size_t operator()(const neardup::SentenceId& id) const noexcept {
        uint64_t x = id.doc_id * 0x9e3779b97f4a7c15ULL ^ (uint64_t(id.index) << 1);
        x ^= x >> 31;
        return static_cast<size_t>(x * 0xbf58476d1ce4e5b9ULL);
    }
};
