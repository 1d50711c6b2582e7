#include "neardup/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

namespace neardup {

namespace {

void put_be16(std::string& out, uint16_t value) {
    out += static_cast<char>(value >> 8);
    out += static_cast<char>(value & 0xff);
}

void put_be32(std::string& out, uint32_t value) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out += static_cast<char>((value >> shift) & 0xff);
}

void put_be64(std::string& out, uint64_t value) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out += static_cast<char>((value >> shift) & 0xff);
}

uint64_t get_be(const char* bytes, size_t count) {
    uint64_t value = 0;
    for (size_t i = 0; i < count; ++i)
        value = value << 8 | static_cast<unsigned char>(bytes[i]);
    return value;
}

}  // namespace

std::string encode_signature_key(const Signature& sig) {
    std::string key;
    key.reserve(signature_key_size(static_cast<uint32_t>(sig.values.size())));
    put_be16(key, sig.draw_index);
    for (uint64_t value : sig.values)
        put_be64(key, value);
    return key;
}

Signature decode_signature_key(std::string_view key) {
    if (key.size() < 2 || (key.size() - 2) % 8 != 0)
        throw std::invalid_argument("signature key of invalid length " +
                                    std::to_string(key.size()));
    Signature sig;
    sig.draw_index = static_cast<uint16_t>(get_be(key.data(), 2));
    sig.values.reserve((key.size() - 2) / 8);
    for (size_t i = 2; i < key.size(); i += 8)
        sig.values.push_back(get_be(key.data() + i, 8));
    return sig;
}

std::vector<Emission> map_document(const Document& doc,
                                   const PipelineParams& params,
                                   const HashFamily& family,
                                   const SignatureSelections& selections) {
    std::vector<Emission> out;
    for (const SentenceRecord& sentence : chunk_sentences(doc, params)) {
        const ShingleSet set = shingle(sentence.text, params.shingle_len);
        const MinhashVector minima = minhash_vector(set, family);
        for (const Signature& sig : signatures(minima, selections))
            out.push_back({encode_signature_key(sig), sentence.id});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sort-based grouping

namespace {

// A record is the fixed-width concatenation key ‖ doc_id(8) ‖ index(4), all
// big-endian, so memcmp order equals (key, doc_id, index) order.
constexpr size_t kIdBytes = 12;

struct RecordLess {
    size_t record_size;
    bool operator()(const char* a, const char* b) const {
        return std::memcmp(a, b, record_size) < 0;
    }
};

struct Partition {
    std::vector<char> buffer;
    std::vector<std::filesystem::path> runs;
};

// One open run file during the merge.
struct RunCursor {
    std::ifstream file;
    std::vector<char> record;
    bool ok = false;

    bool advance() {
        file.read(record.data(), static_cast<std::streamsize>(record.size()));
        ok = file.gcount() == static_cast<std::streamsize>(record.size());
        return ok;
    }
};

}  // namespace

struct SignatureGrouper::Impl {
    size_t key_size;
    size_t record_size;
    GroupOptions options;
    std::filesystem::path spill_dir;
    bool spill_dir_created = false;

    std::mutex mutex;
    std::map<uint16_t, Partition> partitions;  // ordered: merge walks keys ascending
    size_t buffered_bytes = 0;
    uint64_t next_run = 0;

    Impl(size_t key_size_in, GroupOptions options_in)
        : key_size(key_size_in),
          record_size(key_size_in + kIdBytes),
          options(std::move(options_in)) {
        if (key_size < 2)
            throw std::invalid_argument("signature keys are at least 2 bytes");
    }

    ~Impl() {
        if (spill_dir_created) {
            std::error_code ec;
            std::filesystem::remove_all(spill_dir, ec);
        }
    }

    void ensure_spill_dir() {
        if (spill_dir_created)
            return;
        const std::filesystem::path base = options.tmp_dir.empty()
                                               ? std::filesystem::temp_directory_path()
                                               : std::filesystem::path(options.tmp_dir);
        std::random_device rd;
        spill_dir = base / ("neardup-sort-" + std::to_string(rd()) + "-" +
                            std::to_string(rd()));
        std::error_code ec;
        std::filesystem::create_directories(spill_dir, ec);
        if (ec)
            throw std::runtime_error("cannot create spill directory " +
                                     spill_dir.string() + ": " + ec.message());
        spill_dir_created = true;
    }

    static void sort_records(std::vector<char>& buffer, size_t record_size) {
        const size_t count = buffer.size() / record_size;
        std::vector<const char*> order(count);
        for (size_t i = 0; i < count; ++i)
            order[i] = buffer.data() + i * record_size;
        std::sort(order.begin(), order.end(), RecordLess{record_size});
        std::vector<char> sorted(buffer.size());
        for (size_t i = 0; i < count; ++i)
            std::memcpy(sorted.data() + i * record_size, order[i], record_size);
        buffer = std::move(sorted);
    }

    // Caller holds the lock.
    void spill_largest() {
        ensure_spill_dir();
        Partition* victim = nullptr;
        for (auto& [prefix, part] : partitions)
            if (!victim || part.buffer.size() > victim->buffer.size())
                victim = &part;
        if (!victim || victim->buffer.empty())
            return;
        sort_records(victim->buffer, record_size);
        const std::filesystem::path path =
            spill_dir / ("run-" + std::to_string(next_run++) + ".bin");
        std::ofstream out(path, std::ios::binary);
        out.write(victim->buffer.data(),
                  static_cast<std::streamsize>(victim->buffer.size()));
        if (!out)
            throw std::runtime_error("cannot write spill file " + path.string());
        out.close();
        buffered_bytes -= victim->buffer.size();
        victim->runs.push_back(path);
        victim->buffer.clear();
        victim->buffer.shrink_to_fit();
    }

    void add_record(const Emission& emission) {
        if (emission.key.size() != key_size)
            throw std::invalid_argument("emission key size " +
                                        std::to_string(emission.key.size()) +
                                        " does not match grouper key size " +
                                        std::to_string(key_size));
        const uint16_t prefix = static_cast<uint16_t>(
            get_be(emission.key.data(), 2));
        std::string suffix;
        suffix.reserve(kIdBytes);
        put_be64(suffix, emission.id.doc_id);
        put_be32(suffix, emission.id.index);

        std::lock_guard<std::mutex> lock(mutex);
        Partition& part = partitions[prefix];
        part.buffer.insert(part.buffer.end(), emission.key.begin(), emission.key.end());
        part.buffer.insert(part.buffer.end(), suffix.begin(), suffix.end());
        buffered_bytes += record_size;
        while (buffered_bytes > options.sort_mem_bytes)
            spill_largest();
    }

    void emit_partition(Partition& part, const std::function<void(RawCluster&&)>& sink) {
        std::vector<RunCursor> cursors;
        cursors.reserve(part.runs.size() + 1);
        for (const std::filesystem::path& path : part.runs) {
            RunCursor cursor;
            cursor.file.open(path, std::ios::binary);
            if (!cursor.file)
                throw std::runtime_error("cannot reopen spill file " + path.string());
            cursor.record.resize(record_size);
            cursor.advance();
            cursors.push_back(std::move(cursor));
        }

        // The in-memory buffer acts as one more (pre-sorted) run.
        size_t buffer_pos = 0;
        auto buffer_record = [&]() -> const char* {
            return buffer_pos < part.buffer.size() ? part.buffer.data() + buffer_pos
                                                   : nullptr;
        };

        std::vector<char> group_key(key_size);
        std::vector<SentenceId> members;
        bool in_group = false;
        std::vector<char> previous(record_size);
        bool has_previous = false;

        auto flush_group = [&]() {
            if (in_group && members.size() >= 2) {
                RawCluster cluster;
                cluster.key.assign(group_key.data(), key_size);
                cluster.members = members;
                sink(std::move(cluster));
            }
            members.clear();
            in_group = false;
        };

        auto consume = [&](const char* record) {
            if (has_previous && std::memcmp(previous.data(), record, record_size) == 0)
                return;  // duplicate (key, id) pair
            std::memcpy(previous.data(), record, record_size);
            has_previous = true;
            if (!in_group || std::memcmp(group_key.data(), record, key_size) != 0) {
                flush_group();
                std::memcpy(group_key.data(), record, key_size);
                in_group = true;
            }
            members.push_back({get_be(record + key_size, 8),
                               static_cast<uint32_t>(get_be(record + key_size + 8, 4))});
        };

        for (;;) {
            const char* best = nullptr;
            RunCursor* best_cursor = nullptr;
            if (const char* rec = buffer_record())
                best = rec;
            for (RunCursor& cursor : cursors) {
                if (!cursor.ok)
                    continue;
                if (!best ||
                    std::memcmp(cursor.record.data(), best, record_size) < 0) {
                    best = cursor.record.data();
                    best_cursor = &cursor;
                }
            }
            if (!best)
                break;
            consume(best);
            if (best_cursor)
                best_cursor->advance();
            else
                buffer_pos += record_size;
        }
        flush_group();
    }

    void for_each_group(const std::function<void(RawCluster&&)>& sink) {
        // Sort remaining buffers, options.workers partitions at a time.
        std::vector<Partition*> order;
        order.reserve(partitions.size());
        for (auto& [prefix, part] : partitions)
            order.push_back(&part);

        const uint32_t workers = std::max<uint32_t>(1, options.workers);
        std::atomic<size_t> cursor{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto sort_worker = [&]() {
            try {
                for (size_t i = cursor.fetch_add(1); i < order.size();
                     i = cursor.fetch_add(1))
                    sort_records(order[i]->buffer, record_size);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        };
        if (workers == 1 || order.size() <= 1) {
            sort_worker();
        } else {
            std::vector<std::thread> pool;
            for (uint32_t i = 0; i < workers; ++i)
                pool.emplace_back(sort_worker);
            for (std::thread& thread : pool)
                thread.join();
        }
        if (failure)
            std::rethrow_exception(failure);

        // Merge and emit sequentially in ascending partition order.
        for (auto& [prefix, part] : partitions) {
            emit_partition(part, sink);
            part.buffer.clear();
            part.buffer.shrink_to_fit();
        }
    }
};

SignatureGrouper::SignatureGrouper(size_t key_size, GroupOptions options)
    : impl_(std::make_unique<Impl>(key_size, std::move(options))) {}

SignatureGrouper::~SignatureGrouper() = default;

void SignatureGrouper::add(const Emission& emission) {
    impl_->add_record(emission);
}

void SignatureGrouper::add_batch(const std::vector<Emission>& emissions) {
    for (const Emission& emission : emissions)
        impl_->add_record(emission);
}

void SignatureGrouper::for_each_group(const std::function<void(RawCluster&&)>& sink) {
    impl_->for_each_group(sink);
}

std::vector<RawCluster> group_by_signature(const std::vector<Emission>& emissions,
                                           const GroupOptions& options) {
    std::vector<RawCluster> out;
    if (emissions.empty())
        return out;
    SignatureGrouper grouper(emissions.front().key.size(), options);
    grouper.add_batch(emissions);
    grouper.for_each_group([&](RawCluster&& cluster) { out.push_back(std::move(cluster)); });
    return out;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

// Small bounded handoff queue between the document producer and map workers.
class DocumentQueue {
  public:
    explicit DocumentQueue(size_t capacity) : capacity_(capacity) {}

    void push(Document doc) {
        std::unique_lock<std::mutex> lock(mutex_);
        not_full_.wait(lock, [&] { return queue_.size() < capacity_ || aborted_; });
        if (aborted_)
            return;
        queue_.push_back(std::move(doc));
        not_empty_.notify_one();
    }

    std::optional<Document> pop() {
        std::unique_lock<std::mutex> lock(mutex_);
        not_empty_.wait(lock, [&] { return !queue_.empty() || done_ || aborted_; });
        if (aborted_ || queue_.empty())
            return std::nullopt;
        Document doc = std::move(queue_.front());
        queue_.pop_front();
        not_full_.notify_one();
        return doc;
    }

    void close() {
        std::lock_guard<std::mutex> lock(mutex_);
        done_ = true;
        not_empty_.notify_all();
    }

    void abort() {
        std::lock_guard<std::mutex> lock(mutex_);
        aborted_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

  private:
    size_t capacity_;
    std::mutex mutex_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<Document> queue_;
    bool done_ = false;
    bool aborted_ = false;
};

}  // namespace

void run_pipeline(const DocumentSource& source,
                  const PipelineParams& params,
                  const PipelineOptions& options,
                  const std::function<void(RawCluster&&)>& sink) {
    params.validate();
    const HashFamily family(params.seed, params.family_size, params.hash_bits);
    const SignatureSelections selections = make_selections(params);
    SignatureGrouper grouper(signature_key_size(params.sig_len), options.group);

    const uint32_t workers = std::max<uint32_t>(1, options.workers);
    DocumentQueue queue(workers * 4);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto record_failure = [&](std::exception_ptr error) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure)
            failure = error;
        queue.abort();
    };

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (uint32_t i = 0; i < workers; ++i) {
        pool.emplace_back([&]() {
            while (auto doc = queue.pop()) {
                try {
                    grouper.add_batch(map_document(*doc, params, family, selections));
                } catch (const std::exception& error) {
                    record_failure(std::make_exception_ptr(std::runtime_error(
                        "document " + std::to_string(doc->doc_id) + " '" + doc->title +
                        "': " + error.what())));
                    return;
                } catch (...) {
                    record_failure(std::current_exception());
                    return;
                }
            }
        });
    }

    try {
        const auto stream = prepare_articles(source.open());
        while (auto doc = stream->next())
            queue.push(std::move(*doc));
    } catch (...) {
        record_failure(std::current_exception());
    }
    queue.close();
    for (std::thread& thread : pool)
        thread.join();
    if (failure)
        std::rethrow_exception(failure);

    grouper.for_each_group(sink);
}

std::string format_raw_cluster(const RawCluster& cluster) {
    static const char* kHex = "0123456789abcdef";
    std::string line;
    line.reserve(cluster.key.size() * 2 + cluster.members.size() * 16);
    for (unsigned char byte : cluster.key) {
        line += kHex[byte >> 4];
        line += kHex[byte & 0xf];
    }
    line += '\t';
    for (size_t i = 0; i < cluster.members.size(); ++i) {
        if (i)
            line += ',';
        line += std::to_string(cluster.members[i].doc_id);
        line += ':';
        line += std::to_string(cluster.members[i].index);
    }
    return line;
}

}  // namespace neardup
