#include "neardup/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <json.hpp>

namespace neardup {

size_t utf8_length(std::string_view text) {
    size_t count = 0;
    for (unsigned char byte : text)
        count += (byte & 0xc0) != 0x80;  // count non-continuation bytes
    return count;
}

std::vector<size_t> utf8_offsets(std::string_view text) {
    std::vector<size_t> offsets;
    offsets.reserve(text.size() + 1);
    for (size_t i = 0; i < text.size(); ++i) {
        if ((static_cast<unsigned char>(text[i]) & 0xc0) != 0x80)
            offsets.push_back(i);
    }
    offsets.push_back(text.size());
    return offsets;
}

// ---------------------------------------------------------------------------
// Markup stripping

namespace {

bool match_at(std::string_view s, size_t i, std::string_view pat) {
    return s.size() - i >= pat.size() && s.compare(i, pat.size(), pat) == 0;
}

// "<ref", "<ref name=...", "<ref/>", "</ref>" — case-insensitive tag name.
bool is_ref_open(std::string_view s, size_t i) {
    if (s.size() - i < 4 || s[i] != '<')
        return false;
    if ((s[i + 1] | 0x20) != 'r' || (s[i + 2] | 0x20) != 'e' || (s[i + 3] | 0x20) != 'f')
        return false;
    if (s.size() - i == 4)
        return true;
    const char next = s[i + 4];
    return next == '>' || next == '/' || next == ' ' || next == '\t' || next == '\n' ||
           next == '\r';
}

size_t find_ref_close(std::string_view s, size_t i) {
    while (i + 5 < s.size()) {
        if (s[i] == '<' && s[i + 1] == '/' && (s[i + 2] | 0x20) == 'r' &&
            (s[i + 3] | 0x20) == 'e' && (s[i + 4] | 0x20) == 'f') {
            size_t j = i + 5;
            while (j < s.size() && s[j] != '>')
                ++j;
            return j < s.size() ? j + 1 : s.size();
        }
        ++i;
    }
    return s.size();
}

// Scan past a paired construct like {{ }} or {| |} with nesting, returning the
// index just after the closing token (or the text end when unbalanced).
// `closed`, when given, reports whether the construct was actually balanced —
// a construct closing exactly at end-of-text is balanced, not truncated.
size_t skip_paired(std::string_view s, size_t i, std::string_view open, std::string_view close,
                   bool* closed = nullptr) {
    size_t depth = 1;
    i += open.size();
    while (i < s.size()) {
        if (match_at(s, i, open)) {
            ++depth;
            i += open.size();
        } else if (match_at(s, i, close)) {
            i += close.size();
            if (--depth == 0) {
                if (closed)
                    *closed = true;
                return i;
            }
        } else {
            ++i;
        }
    }
    if (closed)
        *closed = false;
    return s.size();
}

std::string strip_once(std::string_view s, int depth);

// [[target]] keeps the target, [[target|anchor]] keeps the anchor (split at
// the first top-level pipe); the kept part is itself stripped.
void append_link(std::string& out, std::string_view inner, int depth) {
    size_t pipe = std::string_view::npos;
    size_t nest = 0;
    for (size_t i = 0; i < inner.size(); ++i) {
        if (match_at(inner, i, "[[")) {
            ++nest;
            ++i;
        } else if (match_at(inner, i, "]]")) {
            if (nest > 0)
                --nest;
            ++i;
        } else if (inner[i] == '|' && nest == 0) {
            pipe = i;
            break;
        }
    }
    const std::string_view kept =
        pipe == std::string_view::npos ? inner : inner.substr(pipe + 1);
    out += strip_once(kept, depth + 1);
}

std::string strip_once(std::string_view s, int depth) {
    if (depth > 64)
        return std::string(s);  // bail out; the fixpoint loop keeps reducing
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        if (match_at(s, i, "<!--")) {
            const size_t end = s.find("-->", i + 4);
            i = end == std::string_view::npos ? s.size() : end + 3;
        } else if (is_ref_open(s, i)) {
            size_t gt = i + 1;
            while (gt < s.size() && s[gt] != '>')
                ++gt;
            if (gt >= s.size()) {
                i = s.size();
            } else if (s[gt - 1] == '/') {
                i = gt + 1;  // self-closing
            } else {
                i = find_ref_close(s, gt + 1);
            }
        } else if (match_at(s, i, "{{")) {
            i = skip_paired(s, i, "{{", "}}");
        } else if (match_at(s, i, "{|")) {
            i = skip_paired(s, i, "{|", "|}");
        } else if (match_at(s, i, "[[")) {
            bool closed = false;
            const size_t end = skip_paired(s, i, "[[", "]]", &closed);
            if (closed)  // an unterminated link drops like any unbalanced construct
                append_link(out, s.substr(i + 2, end - 2 - (i + 2)), depth);
            i = end;
        } else if (s[i] == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
            while (i < s.size() && s[i] == '\'')
                ++i;  // drop bold/italic quote runs, keep single apostrophes
        } else {
            out += s[i++];
        }
    }
    return out;
}

}  // namespace

std::string strip_markup(std::string_view body) {
    // Removals can join fragments into new constructs ("{<!---->{" becomes
    // "{{"), so iterate to a fixed point; each pass only deletes, so the
    // length strictly decreases until stable.
    std::string current(body);
    for (;;) {
        std::string next = strip_once(current, 0);
        if (next == current)
            return current;
        current = std::move(next);
    }
}

// ---------------------------------------------------------------------------
// Sentence chunking

namespace {

bool is_space_byte(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_upper(char c) {
    return c >= 'A' && c <= 'Z';
}

bool is_terminator(char c) {
    return c == '.' || c == '!' || c == '?';
}

}  // namespace

std::vector<SentenceRecord> chunk_sentences(const Document& doc,
                                            const PipelineParams& params) {
    params.validate();

    std::string norm;
    norm.reserve(doc.body.size());
    bool pending_space = false;
    for (char c : doc.body) {
        if (is_space_byte(c)) {
            pending_space = !norm.empty();
        } else {
            if (pending_space) {
                norm += ' ';
                pending_space = false;
            }
            norm += c;
        }
    }

    std::vector<SentenceRecord> out;
    uint32_t index = 0;
    auto emit = [&](size_t begin, size_t end) {
        if (begin >= end)
            return;
        const std::string_view text(norm.data() + begin, end - begin);
        const uint32_t idx = index++;
        const size_t chars = utf8_length(text);
        const int64_t shingle_count =
            static_cast<int64_t>(chars) - params.shingle_len + 1;
        if (shingle_count >= static_cast<int64_t>(params.min_shingles) &&
            shingle_count <= static_cast<int64_t>(params.max_shingles))
            out.push_back({{doc.doc_id, idx}, std::string(text),
                           static_cast<uint32_t>(chars)});
    };

    size_t start = 0;
    for (size_t i = 0; i < norm.size(); ++i) {
        if (is_terminator(norm[i]) && i + 2 < norm.size() && norm[i + 1] == ' ' &&
            is_ascii_upper(norm[i + 2])) {
            emit(start, i + 1);
            start = i + 2;
            ++i;  // skip the separating space
        }
    }
    emit(start, norm.size());
    return out;
}

// ---------------------------------------------------------------------------
// MediaWiki XML dump parsing

struct MediaWikiDumpParser::Scanner {
    std::istream* in;
    std::vector<char> buf;
    size_t pos = 0;
    size_t len = 0;
    uint64_t base = 0;  // byte offset of buf[0] in the stream
    uint64_t pages_seen = 0;

    explicit Scanner(std::istream& stream) : in(&stream), buf(1 << 16) {}

    uint64_t offset() const { return base + pos; }

    int peek() {
        if (pos == len && !refill())
            return -1;
        return static_cast<unsigned char>(buf[pos]);
    }

    int get() {
        const int c = peek();
        if (c >= 0)
            ++pos;
        return c;
    }

    bool refill() {
        base += len;
        pos = 0;
        in->read(buf.data(), static_cast<std::streamsize>(buf.size()));
        len = static_cast<size_t>(in->gcount());
        if (len == 0 && in->bad())
            throw std::runtime_error("read error at byte " + std::to_string(base));
        return len > 0;
    }

    [[noreturn]] void malformed(const std::string& what) const {
        throw std::runtime_error("malformed XML at byte " + std::to_string(offset()) +
                                 ": " + what);
    }
};

namespace {

struct Tag {
    std::string name;     // lowercased element name
    bool closing = false;  // </name>
    bool self_closing = false;
};

void append_entity(std::string& out, const std::string& entity) {
    if (entity == "lt")
        out += '<';
    else if (entity == "gt")
        out += '>';
    else if (entity == "amp")
        out += '&';
    else if (entity == "quot")
        out += '"';
    else if (entity == "apos")
        out += '\'';
    else if (entity.size() > 1 && entity[0] == '#') {
        uint32_t code = 0;
        try {
            code = entity[1] == 'x' || entity[1] == 'X'
                       ? static_cast<uint32_t>(std::stoul(entity.substr(2), nullptr, 16))
                       : static_cast<uint32_t>(std::stoul(entity.substr(1), nullptr, 10));
        } catch (const std::exception&) {
            out += '&' + entity + ';';  // keep unrecognized references verbatim
            return;
        }
        // encode the scalar value back to UTF-8
        if (code < 0x80) {
            out += static_cast<char>(code);
        } else if (code < 0x800) {
            out += static_cast<char>(0xc0 | (code >> 6));
            out += static_cast<char>(0x80 | (code & 0x3f));
        } else if (code < 0x10000) {
            out += static_cast<char>(0xe0 | (code >> 12));
            out += static_cast<char>(0x80 | ((code >> 6) & 0x3f));
            out += static_cast<char>(0x80 | (code & 0x3f));
        } else {
            out += static_cast<char>(0xf0 | (code >> 18));
            out += static_cast<char>(0x80 | ((code >> 12) & 0x3f));
            out += static_cast<char>(0x80 | ((code >> 6) & 0x3f));
            out += static_cast<char>(0x80 | (code & 0x3f));
        }
    } else {
        out += '&' + entity + ';';
    }
}

using Scanner = MediaWikiDumpParser::Scanner;

// Consume a '&...;' reference; scanner sits just past the '&'.
void read_entity(Scanner& scan, std::string& out) {
    std::string entity;
    for (int c = scan.peek(); c >= 0 && c != ';'; c = scan.peek()) {
        if (entity.size() > 12 || c == '<' || c == '&')
            scan.malformed("unterminated entity reference");
        entity += static_cast<char>(scan.get());
    }
    if (scan.peek() < 0)
        scan.malformed("unterminated entity reference");
    scan.get();  // ';'
    append_entity(out, entity);
}

// Advance to the next markup token, discarding character data. Returns false
// at end of input.
bool next_tag(Scanner& scan, Tag& tag) {
    for (;;) {
        int c = scan.get();
        if (c < 0)
            return false;
        if (c != '<')
            continue;
        c = scan.get();
        if (c < 0)
            scan.malformed("dangling '<' at end of input");
        if (c == '!') {
            // comment or doctype; skip to '>' (comments: to '-->')
            if (scan.peek() == '-') {
                int dashes = 0;
                for (int d = scan.get(); d >= 0; d = scan.get()) {
                    if (d == '>' && dashes >= 2)
                        break;
                    dashes = d == '-' ? dashes + 1 : 0;
                }
            } else {
                for (int d = scan.get(); d >= 0 && d != '>'; d = scan.get()) {
                }
            }
            continue;
        }
        if (c == '?') {
            for (int d = scan.get(); d >= 0 && d != '>'; d = scan.get()) {
            }
            continue;
        }
        tag = Tag{};
        if (c == '/') {
            tag.closing = true;
            c = scan.get();
        }
        if (c < 0 || !isalpha(c))
            scan.malformed("tag does not start with a name");
        while (c >= 0 && c != '>' && !isspace(c)) {
            if (c == '/' && scan.peek() == '>') {
                tag.self_closing = true;
                scan.get();
                return true;
            }
            tag.name += static_cast<char>(tolower(c));
            c = scan.get();
        }
        while (c >= 0 && c != '>') {  // skip attributes
            if (c == '/' && scan.peek() == '>') {
                tag.self_closing = true;
                scan.get();
                return true;
            }
            if (c == '"' || c == '\'') {  // quoted attribute value may hold '>'
                const int quote = c;
                for (c = scan.get(); c >= 0 && c != quote; c = scan.get()) {
                }
                if (c < 0)
                    scan.malformed("unterminated attribute value");
            }
            c = scan.get();
        }
        if (c < 0)
            scan.malformed("unterminated tag");
        return true;
    }
}

// Read element character data up to the matching close tag, unescaping
// entity references. The scanner sits just past the opening tag.
std::string read_element_text(Scanner& scan, const std::string& name) {
    std::string out;
    for (;;) {
        int c = scan.get();
        if (c < 0)
            scan.malformed("unterminated <" + name + "> element");
        if (c == '&') {
            read_entity(scan, out);
        } else if (c == '<') {
            if (scan.get() != '/')
                scan.malformed("markup inside <" + name + "> element");
            std::string close;
            for (c = scan.get(); c >= 0 && c != '>' && !isspace(c); c = scan.get())
                close += static_cast<char>(tolower(c));
            while (c >= 0 && c != '>')
                c = scan.get();
            if (c < 0)
                scan.malformed("unterminated close tag");
            if (close != name)
                scan.malformed("expected </" + name + ">, found </" + close + ">");
            return out;
        } else {
            out += static_cast<char>(c);
        }
    }
}

uint64_t parse_uint(Scanner& scan, const std::string& text, const std::string& name) {
    try {
        size_t used = 0;
        const uint64_t value = std::stoull(text, &used);
        if (used != text.size())
            throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        scan.malformed("non-numeric <" + name + "> value '" + text + "'");
    }
}

}  // namespace

MediaWikiDumpParser::MediaWikiDumpParser(std::istream& in)
    : scan_(std::make_shared<Scanner>(in)) {}

std::optional<Document> MediaWikiDumpParser::next() {
    Scanner& scan = *scan_;
    Tag tag;
    // Skip everything between pages (siteinfo, mediawiki wrapper, ...).
    for (;;) {
        if (!next_tag(scan, tag))
            return std::nullopt;
        if (!tag.closing && !tag.self_closing && tag.name == "page")
            break;
    }

    const uint64_t ordinal = ++scan.pages_seen;
    Document doc;
    bool has_title = false, has_id = false, has_text = false;
    int revision_depth = 0;

    auto require = [&](bool ok, const std::string& what) {
        if (ok)
            return;
        if (has_title)
            throw std::runtime_error("page '" + doc.title + "' missing " + what);
        throw std::runtime_error("page #" + std::to_string(ordinal) + " missing " + what);
    };

    for (;;) {
        if (!next_tag(scan, tag))
            scan.malformed("end of input inside <page>");
        if (tag.closing) {
            if (tag.name == "page")
                break;
            if (tag.name == "revision" && revision_depth > 0)
                --revision_depth;
            continue;
        }
        if (tag.name == "redirect") {
            doc.is_redirect = true;
            if (!tag.self_closing)
                read_element_text(scan, tag.name);
        } else if (tag.self_closing) {
            if (tag.name == "text" && !has_text)
                has_text = true;  // <text/> means an empty body
        } else if (tag.name == "title") {
            doc.title = read_element_text(scan, tag.name);
            has_title = true;
        } else if (tag.name == "ns") {
            doc.ns = static_cast<int>(
                parse_uint(scan, read_element_text(scan, tag.name), tag.name));
        } else if (tag.name == "id" && revision_depth == 0 && !has_id) {
            doc.doc_id = parse_uint(scan, read_element_text(scan, tag.name), tag.name);
            has_id = true;
        } else if (tag.name == "revision") {
            ++revision_depth;
        } else if (tag.name == "text") {
            std::string body = read_element_text(scan, tag.name);
            if (!has_text) {
                doc.body = std::move(body);
                has_text = true;
            }
        }
        // other elements (contributor, timestamp, sha1, ...) fall through:
        // their character data is skipped by next_tag
    }

    require(has_title, "<title>");
    require(has_id, "<id>");
    require(has_text, "<revision><text>");
    return doc;
}

// ---------------------------------------------------------------------------
// JSON-lines parsing

JsonLinesParser::JsonLinesParser(std::istream& in) : in_(&in) {}

std::optional<Document> JsonLinesParser::next() {
    std::string line;
    while (std::getline(*in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;

        const auto fail = [&](const std::string& what) -> std::runtime_error {
            return std::runtime_error("line " + std::to_string(line_no_) + ": " + what);
        };

        const nlohmann::json parsed = nlohmann::json::parse(line, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object())
            throw fail("not a JSON object");
        for (const char* field : {"id", "title", "text"})
            if (!parsed.contains(field))
                throw fail(std::string("missing field '") + field + "'");
        if (!parsed["id"].is_number_unsigned())
            throw fail("field 'id' must be an unsigned integer");
        if (!parsed["title"].is_string() || !parsed["text"].is_string())
            throw fail("fields 'title' and 'text' must be strings");

        Document doc;
        doc.doc_id = parsed["id"].get<uint64_t>();
        doc.title = parsed["title"].get<std::string>();
        doc.body = parsed["text"].get<std::string>();
        if (!seen_ids_.insert(doc.doc_id).second)
            throw fail("duplicate document id " + std::to_string(doc.doc_id));
        return doc;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Filtering and sources

bool is_article(const Document& doc) {
    return doc.ns == 0 && !doc.is_redirect;
}

namespace {

class FilterStream final : public DocumentStream {
  public:
    explicit FilterStream(std::unique_ptr<DocumentStream> inner)
        : inner_(std::move(inner)) {}

    std::optional<Document> next() override {
        while (auto doc = inner_->next())
            if (is_article(*doc))
                return doc;
        return std::nullopt;
    }

  private:
    std::unique_ptr<DocumentStream> inner_;
};

class StripStream final : public DocumentStream {
  public:
    explicit StripStream(std::unique_ptr<DocumentStream> inner)
        : inner_(std::move(inner)) {}

    std::optional<Document> next() override {
        auto doc = inner_->next();
        if (doc)
            doc->body = strip_markup(doc->body);
        return doc;
    }

  private:
    std::unique_ptr<DocumentStream> inner_;
};

}  // namespace

std::unique_ptr<DocumentStream> filter_articles(std::unique_ptr<DocumentStream> docs) {
    return std::make_unique<FilterStream>(std::move(docs));
}

std::vector<Document> filter_articles(std::vector<Document> docs) {
    std::erase_if(docs, [](const Document& doc) { return !is_article(doc); });
    return docs;
}

std::unique_ptr<DocumentStream> prepare_articles(std::unique_ptr<DocumentStream> docs) {
    return std::make_unique<StripStream>(filter_articles(std::move(docs)));
}

const char* to_string(CorpusFormat format) {
    switch (format) {
        case CorpusFormat::MediaWikiXml: return "mediawiki-xml";
        case CorpusFormat::JsonLines: return "jsonl";
        case CorpusFormat::TextFiles: return "text";
    }
    return "unknown";
}

std::optional<CorpusFormat> corpus_format_from_string(std::string_view name) {
    if (name == "mediawiki-xml" || name == "xml")
        return CorpusFormat::MediaWikiXml;
    if (name == "jsonl" || name == "json-lines")
        return CorpusFormat::JsonLines;
    if (name == "text")
        return CorpusFormat::TextFiles;
    return std::nullopt;
}

namespace {

std::ifstream open_binary(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file)
        throw std::runtime_error("cannot open input file: " + path);
    return file;
}

bool has_bz2_magic(std::ifstream& file) {
    char magic[3] = {};
    file.read(magic, 3);
    const bool bz2 = file.gcount() == 3 && std::memcmp(magic, "BZh", 3) == 0;
    file.clear();
    file.seekg(0);
    return bz2;
}

// Owns the file handle (and decompressor, when the file is bz2) behind a
// MediaWiki parser.
class XmlFileStream final : public DocumentStream {
  public:
    explicit XmlFileStream(const std::string& path) : file_(open_binary(path)) {
        if (has_bz2_magic(file_)) {
            filter_.push(boost::iostreams::bzip2_decompressor());
            filter_.push(file_);
            parser_.emplace(filter_);
        } else {
            parser_.emplace(file_);
        }
    }

    std::optional<Document> next() override { return parser_->next(); }

  private:
    std::ifstream file_;
    boost::iostreams::filtering_istream filter_;
    std::optional<MediaWikiDumpParser> parser_;
};

class JsonLinesFileStream final : public DocumentStream {
  public:
    explicit JsonLinesFileStream(const std::string& path) : file_(open_binary(path)) {
        parser_.emplace(file_);
    }

    std::optional<Document> next() override { return parser_->next(); }

  private:
    std::ifstream file_;
    std::optional<JsonLinesParser> parser_;
};

// One document per regular file; a directory is walked in sorted order so
// repeated opens yield the identical sequence.
class TextFilesStream final : public DocumentStream {
  public:
    explicit TextFilesStream(const std::string& path) {
        namespace fs = std::filesystem;
        if (fs::is_directory(path)) {
            for (const auto& entry : fs::directory_iterator(path))
                if (entry.is_regular_file())
                    files_.push_back(entry.path());
            std::sort(files_.begin(), files_.end());
        } else {
            files_.emplace_back(path);
        }
    }

    std::optional<Document> next() override {
        if (next_ >= files_.size())
            return std::nullopt;
        const std::filesystem::path& path = files_[next_];
        std::ifstream file = open_binary(path.string());
        std::ostringstream body;
        body << file.rdbuf();
        Document doc;
        doc.doc_id = next_++;
        doc.title = path.filename().string();
        doc.body = body.str();
        return doc;
    }

  private:
    std::vector<std::filesystem::path> files_;
    size_t next_ = 0;
};

class FileSource final : public DocumentSource {
  public:
    FileSource(std::string path, CorpusFormat format)
        : path_(std::move(path)), format_(format) {}

    std::unique_ptr<DocumentStream> open() const override {
        switch (format_) {
            case CorpusFormat::MediaWikiXml:
                return std::make_unique<XmlFileStream>(path_);
            case CorpusFormat::JsonLines:
                return std::make_unique<JsonLinesFileStream>(path_);
            case CorpusFormat::TextFiles:
                return std::make_unique<TextFilesStream>(path_);
        }
        throw std::logic_error("unreachable corpus format");
    }

  private:
    std::string path_;
    CorpusFormat format_;
};

class MemoryStream final : public DocumentStream {
  public:
    explicit MemoryStream(const std::vector<Document>* docs) : docs_(docs) {}

    std::optional<Document> next() override {
        if (next_ >= docs_->size())
            return std::nullopt;
        return (*docs_)[next_++];
    }

  private:
    const std::vector<Document>* docs_;
    size_t next_ = 0;
};

}  // namespace

std::unique_ptr<DocumentSource> make_file_source(std::string path, CorpusFormat format) {
    return std::make_unique<FileSource>(std::move(path), format);
}

std::unique_ptr<DocumentStream> MemoryCorpus::open() const {
    return std::make_unique<MemoryStream>(&docs_);
}

}  // namespace neardup
