#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "apprank/types.hpp"

// Log parsing, dedup, session segmentation, vocabularies and dataset splits.
// All inputs are UTF-8 tab-separated files with a header row; timestamps are
// epoch seconds UTC.
namespace apprank::dataio {

struct ParseError {
    std::size_t line_no = 0;  // 1-based, header is line 1
    std::string message;
};

template <typename Record>
struct ParseResult {
    std::vector<Record> records;
    std::vector<ParseError> errors;
};

// Schema violations are collected per line, not silently dropped; a missing
// file or a bad header throws std::runtime_error.
ParseResult<QueryRecord> parse_query_log(const std::string& path);
ParseResult<UsageEvent> parse_usage_log(const std::string& path);
ParseResult<UsageStat> parse_stats_log(const std::string& path);

void write_query_log(const std::string& path, const std::vector<QueryRecord>& records);
void write_usage_log(const std::string& path, const std::vector<UsageEvent>& events);
void write_stats_log(const std::string& path, const std::vector<UsageStat>& stats);

// Merges consecutive same-app events of one user when the gap to the
// previous event is under 60 s, keeping the earliest timestamp. Input must
// be sorted by (user, timestamp); throws std::invalid_argument otherwise.
std::vector<UsageEvent> dedup_usage(const std::vector<UsageEvent>& events);

struct Session {
    int session_id = 0;
    std::string user_id;
    std::vector<std::size_t> item_indices;  // positions into the source list
    Timestamp start = 0;
    Timestamp end = 0;
};

inline constexpr Timestamp kSessionGapSeconds = 300;

// Items are (source index, timestamp) for one user, sorted by timestamp.
// A gap strictly greater than gap_seconds closes the session; a gap of
// exactly gap_seconds stays in-session.
std::vector<Session> segment_sessions(const std::string& user_id,
                                      const std::vector<std::pair<std::size_t, Timestamp>>& items,
                                      Timestamp gap_seconds = kSessionGapSeconds);

// Group by user (users in first-appearance order), segment each.
std::vector<Session> sessions_from_events(const std::vector<UsageEvent>& events,
                                          Timestamp gap_seconds = kSessionGapSeconds);
std::vector<Session> sessions_from_queries(const std::vector<QueryRecord>& records,
                                           Timestamp gap_seconds = kSessionGapSeconds);

// Lowercases (ASCII), splits on Unicode whitespace, strips leading/trailing
// ASCII punctuation, drops empty tokens. No stemming, no stopword removal.
std::vector<std::string> tokenize(const std::string& query);

// Dense token <-> id map with document frequencies. When built with an unk
// token, lookups of unknown tokens resolve to it.
class Vocabulary {
public:
    static constexpr const char* kUnkToken = "<unk>";
    static constexpr const char* kPadToken = "<pad>";

    Vocabulary() = default;

    // docs: one token list per document. Tokens seen in fewer than
    // min_count documents are folded into unk (when with_unk).
    static Vocabulary build(const std::vector<std::vector<std::string>>& docs,
                            std::size_t min_count = 1, bool with_unk = true);

    int add(const std::string& token);  // idempotent, returns id
    int id_of(const std::string& token) const;  // -1 when absent
    int id_or_unk(const std::string& token) const;
    const std::string& token(int id) const;
    std::size_t size() const { return tokens_.size(); }
    int unk_id() const { return unk_id_; }
    std::uint64_t doc_freq(int id) const;
    std::size_t num_docs() const { return num_docs_; }

    const std::vector<std::string>& tokens() const { return tokens_; }

    std::string to_json() const;
    static Vocabulary from_json(const std::string& text);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
    std::vector<std::uint64_t> doc_freqs_;
    std::size_t num_docs_ = 0;
    int unk_id_ = -1;
};

enum class SplitName { istas_r, istas_t, lsapp };

const char* to_string(SplitName name);
SplitName split_name_from_string(const std::string& s);

struct DatasetSplit {
    SplitName name = SplitName::istas_r;
    std::vector<std::size_t> train, validation, test;
    std::uint64_t seed = 0;  // istas_r only
    std::array<double, 3> ratios{0.7, 0.1, 0.2};

    std::size_t total() const { return train.size() + validation.size() + test.size(); }
};

// Uniformly random partition of [0, n); deterministic for a given seed.
DatasetSplit split_istas_r(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed);

// Per-user chronological split: earliest floor(0.7 n) records (at least one)
// to train, latest ceil(0.2 n) to test, remainder to validation.
DatasetSplit split_istas_t(const std::vector<QueryRecord>& records,
                           std::array<double, 3> ratios = {0.7, 0.1, 0.2});
DatasetSplit split_lsapp(const std::vector<UsageEvent>& events,
                         std::array<double, 3> ratios = {0.7, 0.1, 0.2});

// Line-oriented index file with a JSON header line.
void write_split(const DatasetSplit& split, const std::string& path);
DatasetSplit read_split(const std::string& path);

}  // namespace apprank::dataio
