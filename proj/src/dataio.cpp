#include "apprank/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "apprank/rng.hpp"

namespace apprank::dataio {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string trim_ascii(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool parse_timestamp(const std::string& s, Timestamp& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stoll(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size();
}

// opens the file, checks the exact header, then hands each data line to
// parse_line which returns an error message or appends a record
template <typename Record, typename LineFn>
ParseResult<Record> parse_tsv(const std::string& path, const std::string& expected_header,
                              LineFn parse_line) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file, header expected: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header) {
        throw std::runtime_error("malformed header in " + path + ": expected '" +
                                 expected_header + "', got '" + line + "'");
    }
    ParseResult<Record> result;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string err = parse_line(line, result.records);
        if (!err.empty()) result.errors.push_back({line_no, std::move(err)});
    }
    return result;
}

}  // namespace

ParseResult<QueryRecord> parse_query_log(const std::string& path) {
    return parse_tsv<QueryRecord>(
        path, "user_id\ttimestamp\tquery\ttarget_app",
        [](const std::string& line, std::vector<QueryRecord>& out) -> std::string {
            const auto f = split_tabs(line);
            if (f.size() != 4) return "expected 4 fields, got " + std::to_string(f.size());
            if (f[0].empty()) return "empty user_id";
            QueryRecord r;
            r.user_id = f[0];
            if (!parse_timestamp(f[1], r.timestamp) || r.timestamp <= 0)
                return "invalid timestamp: '" + f[1] + "'";
            if (trim_ascii(f[2]).empty()) return "empty query";
            r.query = f[2];
            if (f[3].empty()) return "empty target_app";
            r.target_app = f[3];
            out.push_back(std::move(r));
            return {};
        });
}

ParseResult<UsageEvent> parse_usage_log(const std::string& path) {
    return parse_tsv<UsageEvent>(
        path, "user_id\ttimestamp\tapp_id\tkind",
        [](const std::string& line, std::vector<UsageEvent>& out) -> std::string {
            const auto f = split_tabs(line);
            if (f.size() != 4) return "expected 4 fields, got " + std::to_string(f.size());
            if (f[0].empty()) return "empty user_id";
            UsageEvent e;
            e.user_id = f[0];
            if (!parse_timestamp(f[1], e.timestamp) || e.timestamp <= 0)
                return "invalid timestamp: '" + f[1] + "'";
            if (f[2].empty()) return "empty app_id";
            e.app_id = f[2];
            try {
                e.kind = event_kind_from_string(f[3]);
            } catch (const std::invalid_argument&) {
                return "unknown event kind: '" + f[3] + "'";
            }
            out.push_back(std::move(e));
            return {};
        });
}

ParseResult<UsageStat> parse_stats_log(const std::string& path) {
    return parse_tsv<UsageStat>(
        path, "user_id\tsnapshot_timestamp\tapp_id\tseconds_in_past_24h",
        [](const std::string& line, std::vector<UsageStat>& out) -> std::string {
            const auto f = split_tabs(line);
            if (f.size() != 4) return "expected 4 fields, got " + std::to_string(f.size());
            if (f[0].empty()) return "empty user_id";
            UsageStat s;
            s.user_id = f[0];
            if (!parse_timestamp(f[1], s.snapshot_timestamp) || s.snapshot_timestamp <= 0)
                return "invalid snapshot_timestamp: '" + f[1] + "'";
            if (f[2].empty()) return "empty app_id";
            s.app_id = f[2];
            if (!parse_double(f[3], s.seconds_in_past_24h) || s.seconds_in_past_24h < 0)
                return "invalid seconds_in_past_24h: '" + f[3] + "'";
            out.push_back(std::move(s));
            return {};
        });
}

void write_query_log(const std::string& path, const std::vector<QueryRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "user_id\ttimestamp\tquery\ttarget_app\n";
    for (const auto& r : records) {
        out << r.user_id << '\t' << r.timestamp << '\t' << r.query << '\t' << r.target_app
            << '\n';
    }
}

void write_usage_log(const std::string& path, const std::vector<UsageEvent>& events) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "user_id\ttimestamp\tapp_id\tkind\n";
    for (const auto& e : events) {
        out << e.user_id << '\t' << e.timestamp << '\t' << e.app_id << '\t' << to_string(e.kind)
            << '\n';
    }
}

void write_stats_log(const std::string& path, const std::vector<UsageStat>& stats) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "user_id\tsnapshot_timestamp\tapp_id\tseconds_in_past_24h\n";
    char buf[64];
    for (const auto& s : stats) {
        std::snprintf(buf, sizeof(buf), "%.6g", s.seconds_in_past_24h);
        out << s.user_id << '\t' << s.snapshot_timestamp << '\t' << s.app_id << '\t' << buf
            << '\n';
    }
}

std::vector<UsageEvent> dedup_usage(const std::vector<UsageEvent>& events) {
    for (std::size_t i = 1; i < events.size(); ++i) {
        const auto& a = events[i - 1];
        const auto& b = events[i];
        if (a.user_id > b.user_id || (a.user_id == b.user_id && a.timestamp > b.timestamp)) {
            throw std::invalid_argument("dedup_usage: input not sorted by (user, timestamp)");
        }
    }
    std::vector<UsageEvent> out;
    out.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (i > 0) {
            const auto& prev_in = events[i - 1];
            // gap measured against the previous input event, so a burst of
            // short-gap repeats collapses into one record
            if (prev_in.user_id == e.user_id && prev_in.app_id == e.app_id &&
                e.timestamp - prev_in.timestamp < 60) {
                continue;
            }
        }
        out.push_back(e);
    }
    return out;
}

std::vector<Session> segment_sessions(const std::string& user_id,
                                      const std::vector<std::pair<std::size_t, Timestamp>>& items,
                                      Timestamp gap_seconds) {
    for (std::size_t i = 1; i < items.size(); ++i) {
        if (items[i].second < items[i - 1].second) {
            throw std::invalid_argument("segment_sessions: items not sorted by timestamp");
        }
    }
    std::vector<Session> sessions;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const bool fresh = sessions.empty() ||
                           items[i].second - items[i - 1].second > gap_seconds;
        if (fresh) {
            Session s;
            s.session_id = static_cast<int>(sessions.size());
            s.user_id = user_id;
            s.start = items[i].second;
            sessions.push_back(std::move(s));
        }
        sessions.back().item_indices.push_back(items[i].first);
        sessions.back().end = items[i].second;
    }
    return sessions;
}

namespace {

template <typename Record>
std::vector<Session> sessions_grouped(const std::vector<Record>& records,
                                      Timestamp gap_seconds) {
    // users in first-appearance order
    std::vector<std::string> users;
    std::unordered_map<std::string, std::vector<std::pair<std::size_t, Timestamp>>> per_user;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = per_user.try_emplace(records[i].user_id);
        if (inserted) users.push_back(records[i].user_id);
        it->second.emplace_back(i, records[i].timestamp);
    }
    std::vector<Session> all;
    for (const auto& user : users) {
        auto& items = per_user[user];
        std::stable_sort(items.begin(), items.end(),
                         [](const auto& a, const auto& b) { return a.second < b.second; });
        auto sessions = segment_sessions(user, items, gap_seconds);
        for (auto& s : sessions) all.push_back(std::move(s));
    }
    return all;
}

}  // namespace

std::vector<Session> sessions_from_events(const std::vector<UsageEvent>& events,
                                          Timestamp gap_seconds) {
    return sessions_grouped(events, gap_seconds);
}

std::vector<Session> sessions_from_queries(const std::vector<QueryRecord>& records,
                                           Timestamp gap_seconds) {
    return sessions_grouped(records, gap_seconds);
}

namespace {

bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case U'\t': case U'\n': case U'\v': case U'\f': case U'\r': case U' ':
        case 0x0085: case 0x00a0: case 0x1680:
        case 0x2000: case 0x2001: case 0x2002: case 0x2003: case 0x2004: case 0x2005:
        case 0x2006: case 0x2007: case 0x2008: case 0x2009: case 0x200a:
        case 0x2028: case 0x2029: case 0x202f: case 0x205f: case 0x3000:
            return true;
        default:
            return false;
    }
}

// decodes one UTF-8 code point; on malformed input consumes one byte and
// returns the byte value so nothing is ever dropped silently
char32_t decode_utf8(const std::string& s, std::size_t& i) {
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if ((b0 & 0x80) == 0) {
        len = 1;
    } else if ((b0 & 0xe0) == 0xc0) {
        len = 2;
        cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
        len = 3;
        cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return b0;
    }
    if (i + len > s.size()) {
        ++i;
        return b0;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const unsigned char bk = static_cast<unsigned char>(s[i + k]);
        if ((bk & 0xc0) != 0x80) {
            ++i;
            return b0;
        }
        cp = (cp << 6) | (bk & 0x3f);
    }
    i += len;
    return cp;
}

bool is_ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::string strip_edge_punct(const std::string& tok) {
    std::size_t b = 0, e = tok.size();
    while (b < e && is_ascii_punct(tok[b])) ++b;
    while (e > b && is_ascii_punct(tok[e - 1])) --e;
    return tok.substr(b, e - b);
}

}  // namespace

std::vector<std::string> tokenize(const std::string& query) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < query.size()) {
        const std::size_t start = i;
        const char32_t cp = decode_utf8(query, i);
        if (is_unicode_space(cp)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
        } else {
            for (std::size_t k = start; k < i; ++k) {
                char c = query[k];
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
                current.push_back(c);
            }
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));

    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (auto& tok : tokens) {
        std::string stripped = strip_edge_punct(tok);
        if (!stripped.empty()) out.push_back(std::move(stripped));
    }
    return out;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& docs,
                             std::size_t min_count, bool with_unk) {
    // token counts over all occurrences, doc frequencies over documents;
    // first-appearance order keeps ids stable for a given corpus
    std::vector<std::string> order;
    std::unordered_map<std::string, std::uint64_t> occurrences;
    std::unordered_map<std::string, std::uint64_t> doc_freq;
    for (const auto& doc : docs) {
        std::unordered_map<std::string, bool> seen;
        for (const auto& tok : doc) {
            auto [it, inserted] = occurrences.try_emplace(tok, 0);
            if (inserted) order.push_back(tok);
            ++it->second;
            if (!seen.count(tok)) {
                seen[tok] = true;
                ++doc_freq[tok];
            }
        }
    }

    Vocabulary v;
    v.num_docs_ = docs.size();
    if (with_unk) v.unk_id_ = v.add(kUnkToken);
    for (const auto& tok : order) {
        if (occurrences[tok] >= min_count) {
            const int id = v.add(tok);
            v.doc_freqs_[static_cast<std::size_t>(id)] = doc_freq[tok];
        } else if (with_unk) {
            v.doc_freqs_[static_cast<std::size_t>(v.unk_id_)] += doc_freq[tok];
        }
    }
    return v;
}

int Vocabulary::add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    ids_[token] = id;
    if (doc_freqs_.size() < tokens_.size()) doc_freqs_.resize(tokens_.size(), 0);
    return id;
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? -1 : it->second;
}

int Vocabulary::id_or_unk(const std::string& token) const {
    const int id = id_of(token);
    if (id >= 0) return id;
    if (unk_id_ < 0) throw std::out_of_range("token not in vocabulary and no unk: " + token);
    return unk_id_;
}

const std::string& Vocabulary::token(int id) const {
    return tokens_.at(static_cast<std::size_t>(id));
}

std::uint64_t Vocabulary::doc_freq(int id) const {
    return doc_freqs_.at(static_cast<std::size_t>(id));
}

std::string Vocabulary::to_json() const {
    nlohmann::json j;
    j["tokens"] = tokens_;
    j["doc_freqs"] = doc_freqs_;
    j["num_docs"] = num_docs_;
    j["unk_id"] = unk_id_;
    return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    Vocabulary v;
    for (const auto& tok : j.at("tokens")) v.add(tok.get<std::string>());
    v.doc_freqs_ = j.at("doc_freqs").get<std::vector<std::uint64_t>>();
    v.num_docs_ = j.at("num_docs").get<std::size_t>();
    v.unk_id_ = j.at("unk_id").get<int>();
    return v;
}

const char* to_string(SplitName name) {
    switch (name) {
        case SplitName::istas_r: return "istas_r";
        case SplitName::istas_t: return "istas_t";
        case SplitName::lsapp: return "lsapp";
    }
    return "unknown";
}

SplitName split_name_from_string(const std::string& s) {
    if (s == "istas_r") return SplitName::istas_r;
    if (s == "istas_t") return SplitName::istas_t;
    if (s == "lsapp") return SplitName::lsapp;
    throw std::invalid_argument("unknown split name: " + s);
}

namespace {

struct SplitSizes {
    std::size_t train, valid, test;
};

// train = floor(r_train * n) (at least 1 when n >= 1), test = ceil(r_test * n)
// capped by what remains, validation = remainder
SplitSizes split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
    SplitSizes s{0, 0, 0};
    if (n == 0) return s;
    s.train = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(n)));
    if (s.train == 0) s.train = 1;
    if (s.train > n) s.train = n;
    s.test = static_cast<std::size_t>(std::ceil(ratios[2] * static_cast<double>(n)));
    if (s.test > n - s.train) s.test = n - s.train;
    s.valid = n - s.train - s.test;
    return s;
}

void check_ratios(const std::array<double, 3>& ratios) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::fabs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must sum to 1");
    }
}

}  // namespace

DatasetSplit split_istas_r(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed) {
    check_ratios(ratios);
    if (n == 0) throw std::invalid_argument("split_istas_r: empty input");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    RngStream rng(seed, "split.istas_r");
    rng.shuffle(idx);

    const SplitSizes sizes = split_sizes(n, ratios);
    DatasetSplit split;
    split.name = SplitName::istas_r;
    split.seed = seed;
    split.ratios = ratios;
    split.train.assign(idx.begin(), idx.begin() + sizes.train);
    split.validation.assign(idx.begin() + sizes.train, idx.begin() + sizes.train + sizes.valid);
    split.test.assign(idx.begin() + sizes.train + sizes.valid, idx.end());
    return split;
}

namespace {

template <typename Record>
DatasetSplit split_chronological(const std::vector<Record>& records, SplitName name,
                                 const std::array<double, 3>& ratios) {
    check_ratios(ratios);
    std::vector<std::string> users;
    std::unordered_map<std::string, std::vector<std::size_t>> per_user;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = per_user.try_emplace(records[i].user_id);
        if (inserted) users.push_back(records[i].user_id);
        it->second.push_back(i);
    }

    DatasetSplit split;
    split.name = name;
    split.ratios = ratios;
    for (const auto& user : users) {
        auto& idx = per_user[user];
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return records[a].timestamp < records[b].timestamp;
        });
        const SplitSizes sizes = split_sizes(idx.size(), ratios);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (k < sizes.train) {
                split.train.push_back(idx[k]);
            } else if (k < sizes.train + sizes.valid) {
                split.validation.push_back(idx[k]);
            } else {
                split.test.push_back(idx[k]);
            }
        }
    }
    return split;
}

}  // namespace

DatasetSplit split_istas_t(const std::vector<QueryRecord>& records,
                           std::array<double, 3> ratios) {
    return split_chronological(records, SplitName::istas_t, ratios);
}

DatasetSplit split_lsapp(const std::vector<UsageEvent>& events, std::array<double, 3> ratios) {
    return split_chronological(events, SplitName::lsapp, ratios);
}

void write_split(const DatasetSplit& split, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write split file: " + path);
    nlohmann::json header;
    header["name"] = to_string(split.name);
    header["seed"] = split.seed;
    header["ratios"] = split.ratios;
    out << header.dump() << '\n';
    for (auto i : split.train) out << "train\t" << i << '\n';
    for (auto i : split.validation) out << "valid\t" << i << '\n';
    for (auto i : split.test) out << "test\t" << i << '\n';
}

DatasetSplit read_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read split file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty split file: " + path);
    const auto header = nlohmann::json::parse(line);
    DatasetSplit split;
    split.name = split_name_from_string(header.at("name").get<std::string>());
    split.seed = header.at("seed").get<std::uint64_t>();
    split.ratios = header.at("ratios").get<std::array<double, 3>>();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 2) {
            throw std::runtime_error("bad split line " + std::to_string(line_no) + " in " + path);
        }
        const std::size_t idx = std::stoull(fields[1]);
        if (fields[0] == "train") {
            split.train.push_back(idx);
        } else if (fields[0] == "valid") {
            split.validation.push_back(idx);
        } else if (fields[0] == "test") {
            split.test.push_back(idx);
        } else {
            throw std::runtime_error("bad split tag '" + fields[0] + "' in " + path);
        }
    }
    return split;
}

}  // namespace apprank::dataio
