#include "apprank/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace apprank::analysis {

namespace {

SummaryStat summarize(const std::vector<double>& values) {
    SummaryStat s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size()));  // population sd
    return s;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::int64_t utc_day(Timestamp t) { return t / 86400; }

// single-spaced code point count; inter-token whitespace collapses to one
std::size_t normalized_char_count(const std::string& query) {
    std::size_t count = 0;
    bool in_space = true;  // leading whitespace dropped
    std::size_t pending_space = 0;
    std::size_t i = 0;
    while (i < query.size()) {
        const unsigned char b = static_cast<unsigned char>(query[i]);
        std::size_t len = 1;
        if ((b & 0xe0) == 0xc0) len = 2;
        else if ((b & 0xf0) == 0xe0) len = 3;
        else if ((b & 0xf8) == 0xf0) len = 4;
        if (i + len > query.size()) len = 1;
        const bool space = len == 1 && std::isspace(b);
        if (space) {
            if (!in_space) pending_space = 1;
            in_space = true;
        } else {
            count += pending_space + 1;
            pending_space = 0;
            in_space = false;
        }
        i += len;
    }
    return count;
}

}  // namespace

double query_overlap(const std::vector<std::string>& q1_tokens,
                     const std::vector<std::string>& q2_tokens) {
    const std::set<std::string> a(q1_tokens.begin(), q1_tokens.end());
    const std::set<std::string> b(q2_tokens.begin(), q2_tokens.end());
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : a) inter += b.count(t);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

OverlapRow overlap_row(const std::string& name, const std::vector<std::set<std::string>>& pool,
                       const std::vector<double>& thresholds) {
    OverlapRow row;
    row.app = name;
    row.num_queries = pool.size();
    for (double tau : thresholds) row.pct_by_threshold[tau] = 0.0;
    if (pool.size() < 2) return row;

    for (double tau : thresholds) {
        std::size_t covered = 0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            for (std::size_t j = 0; j < pool.size(); ++j) {
                if (i == j) continue;
                std::size_t inter = 0;
                for (const auto& t : pool[i]) inter += pool[j].count(t);
                const std::size_t uni = pool[i].size() + pool[j].size() - inter;
                const double sim =
                    uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
                if (sim > tau) {
                    ++covered;
                    break;
                }
            }
        }
        row.pct_by_threshold[tau] =
            100.0 * static_cast<double>(covered) / static_cast<double>(pool.size());
    }
    return row;
}

}  // namespace

OverlapReport overlap_report(const std::vector<QueryRecord>& records,
                             const std::vector<double>& thresholds) {
    if (records.size() < 2) {
        throw std::invalid_argument("overlap_report: need at least 2 queries");
    }
    std::vector<std::set<std::string>> all_pool;
    std::map<std::string, std::vector<std::set<std::string>>> app_pools;
    for (const auto& r : records) {
        const auto tokens = dataio::tokenize(r.query);
        std::set<std::string> terms(tokens.begin(), tokens.end());
        all_pool.push_back(terms);
        app_pools[r.target_app].push_back(std::move(terms));
    }

    OverlapReport report;
    report.all = overlap_row("All", all_pool, thresholds);
    for (const auto& [app, pool] : app_pools) {
        report.per_app.push_back(overlap_row(app, pool, thresholds));
    }
    return report;
}

CategoryMap load_category_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open category map: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty category map: " + path);
    CategoryMap map;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        map[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return map;
}

int TransitionModel::index_of(const std::string& state) const {
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i] == state) return static_cast<int>(i);
    }
    return -1;
}

std::vector<TransitionEdge> TransitionModel::edges_over_threshold() const {
    std::vector<TransitionEdge> edges;
    for (std::size_t r = 0; r < states.size(); ++r) {
        if (row_counts[r] == 0) continue;
        for (std::size_t c = 0; c < states.size(); ++c) {
            const double p = probs.at(static_cast<int>(r), static_cast<int>(c));
            if (p > threshold) edges.push_back({states[r], states[c], p});
        }
    }
    return edges;
}

TransitionModel markov_transitions(const std::vector<UsageEvent>& events,
                                   const std::vector<dataio::Session>& sessions,
                                   TransitionLevel level, const CategoryMap* categories,
                                   double threshold) {
    auto state_of = [&](const std::string& app) -> std::string {
        if (level == TransitionLevel::app) return app;
        if (categories == nullptr) return kUnknownCategory;
        auto it = categories->find(app);
        return it == categories->end() ? kUnknownCategory : it->second;
    };

    // collect states in deterministic order: start, then sorted names
    std::set<std::string> names;
    for (const auto& s : sessions) {
        for (auto idx : s.item_indices) names.insert(state_of(events[idx].app_id));
    }
    TransitionModel model;
    model.threshold = threshold;
    model.states.push_back(kStartState);
    for (const auto& n : names) model.states.push_back(n);

    std::unordered_map<std::string, int> index;
    for (std::size_t i = 0; i < model.states.size(); ++i) {
        index[model.states[i]] = static_cast<int>(i);
    }

    const int n = static_cast<int>(model.states.size());
    num::Matrix counts(n, n);
    for (const auto& s : sessions) {
        if (s.item_indices.empty()) continue;
        int prev = index[kStartState];
        for (auto idx : s.item_indices) {
            const int cur = index[state_of(events[idx].app_id)];
            counts.at(prev, cur) += 1.0;
            prev = cur;
        }
    }

    model.probs = num::Matrix(n, n);
    model.row_counts.assign(static_cast<std::size_t>(n), 0);
    for (int r = 0; r < n; ++r) {
        double total = 0.0;
        for (int c = 0; c < n; ++c) total += counts.at(r, c);
        model.row_counts[static_cast<std::size_t>(r)] = static_cast<std::uint64_t>(total);
        if (total > 0.0) {
            for (int c = 0; c < n; ++c) model.probs.at(r, c) = counts.at(r, c) / total;
        }
    }
    return model;
}

num::Matrix CooccurrenceMatrix::display() const {
    num::Matrix m = normalized;
    for (int i = 0; i < m.rows; ++i) m.at(i, i) = 0.0;
    return m;
}

int CooccurrenceMatrix::index_of(const std::string& app) const {
    for (std::size_t i = 0; i < apps.size(); ++i) {
        if (apps[i] == app) return static_cast<int>(i);
    }
    return -1;
}

CooccurrenceMatrix cooccurrence(const std::vector<UsageEvent>& events,
                                const std::vector<dataio::Session>& sessions) {
    std::set<std::string> names;
    for (const auto& s : sessions) {
        for (auto idx : s.item_indices) names.insert(events[idx].app_id);
    }
    CooccurrenceMatrix result;
    result.apps.assign(names.begin(), names.end());
    std::unordered_map<std::string, int> index;
    for (std::size_t i = 0; i < result.apps.size(); ++i) {
        index[result.apps[i]] = static_cast<int>(i);
    }

    const int n = static_cast<int>(result.apps.size());
    result.normalized = num::Matrix(n, n);
    double total = 0.0;
    for (const auto& s : sessions) {
        std::set<std::string> present;
        for (auto idx : s.item_indices) present.insert(events[idx].app_id);
        std::vector<int> ids;
        for (const auto& app : present) ids.push_back(index[app]);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            result.normalized.at(ids[i], ids[i]) += 1.0;
            total += 1.0;
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                result.normalized.at(ids[i], ids[j]) += 1.0;
                result.normalized.at(ids[j], ids[i]) += 1.0;
                total += 2.0;
            }
        }
    }
    if (total > 0.0) {
        for (double& v : result.normalized.v) v /= total;
    }
    return result;
}

std::uint64_t ContextRankHistogram::total() const {
    std::uint64_t t = overflow;
    for (auto c : counts) t += c;
    return t;
}

double ContextRankHistogram::fraction_at_rank(std::size_t rank) const {
    const std::uint64_t t = total();
    if (t == 0 || rank == 0 || rank > counts.size()) return 0.0;
    return static_cast<double>(counts[rank - 1]) / static_cast<double>(t);
}

ContextRankHistogram context_rank_histogram(const std::vector<QueryRecord>& records,
                                            const context::UsageStatsTable& stats) {
    ContextRankHistogram hist;
    for (const auto& r : records) {
        const auto dist = stats.distribution(r.user_id, r.timestamp);
        if (dist.empty) {
            ++hist.overflow;
            continue;
        }
        // usage ordering: most time first, ties by app id
        std::vector<std::pair<std::string, double>> order(dist.probs.begin(), dist.probs.end());
        std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        std::size_t rank = 0;
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (order[i].first == r.target_app) {
                rank = i + 1;
                break;
            }
        }
        if (rank == 0) {
            ++hist.overflow;
        } else {
            if (hist.counts.size() < rank) hist.counts.resize(rank, 0);
            ++hist.counts[rank - 1];
        }
    }
    return hist;
}

QueryDatasetStats descriptive_stats(const std::vector<QueryRecord>& records) {
    QueryDatasetStats s;
    s.num_queries = records.size();

    std::set<std::string> unique_queries, users, apps;
    std::set<std::int64_t> days;
    std::map<std::string, double> per_user;
    std::map<std::string, std::set<std::string>> apps_per_user;
    std::map<std::string, std::set<std::int64_t>> days_per_user;
    std::map<std::int64_t, double> per_day;
    std::vector<double> terms, chars;
    for (const auto& r : records) {
        unique_queries.insert(r.query);
        users.insert(r.user_id);
        apps.insert(r.target_app);
        days.insert(utc_day(r.timestamp));
        per_user[r.user_id] += 1.0;
        apps_per_user[r.user_id].insert(r.target_app);
        days_per_user[r.user_id].insert(utc_day(r.timestamp));
        per_day[utc_day(r.timestamp)] += 1.0;
        terms.push_back(static_cast<double>(dataio::tokenize(r.query).size()));
        chars.push_back(static_cast<double>(normalized_char_count(r.query)));
    }
    s.num_unique_queries = unique_queries.size();
    s.num_users = users.size();
    s.num_unique_apps = apps.size();
    s.num_days = days.size();

    const auto sessions = dataio::sessions_from_queries(records);
    s.num_sessions = sessions.size();
    std::vector<double> queries_per_session;
    for (const auto& sess : sessions) {
        queries_per_session.push_back(static_cast<double>(sess.item_indices.size()));
    }

    std::vector<double> user_counts, day_counts, user_apps, user_days;
    for (const auto& [u, c] : per_user) user_counts.push_back(c);
    for (const auto& [d, c] : per_day) day_counts.push_back(c);
    for (const auto& [u, a] : apps_per_user) user_apps.push_back(static_cast<double>(a.size()));
    for (const auto& [u, d] : days_per_user) user_days.push_back(static_cast<double>(d.size()));

    s.queries_per_user = summarize(user_counts);
    s.queries_per_session = summarize(queries_per_session);
    s.queries_per_day = summarize(day_counts);
    s.report_days_per_user = summarize(user_days);
    s.unique_apps_per_user = summarize(user_apps);
    s.query_terms = summarize(terms);
    s.query_chars = summarize(chars);
    return s;
}

UsageDatasetStats descriptive_usage_stats(const std::vector<UsageEvent>& events) {
    UsageDatasetStats s;
    s.num_records = events.size();

    std::set<std::string> users, apps;
    std::map<std::string, std::pair<Timestamp, Timestamp>> user_span;
    for (const auto& e : events) {
        users.insert(e.user_id);
        apps.insert(e.app_id);
        auto [it, inserted] = user_span.try_emplace(e.user_id,
                                                    std::make_pair(e.timestamp, e.timestamp));
        if (!inserted) {
            it->second.first = std::min(it->second.first, e.timestamp);
            it->second.second = std::max(it->second.second, e.timestamp);
        }
    }
    s.num_users = users.size();
    s.num_unique_apps = apps.size();

    double span_days = 0.0;
    for (const auto& [u, span] : user_span) {
        span_days += static_cast<double>(span.second - span.first) / 86400.0;
    }
    s.mean_duration_days_per_user =
        user_span.empty() ? 0.0 : span_days / static_cast<double>(user_span.size());

    const auto sessions = dataio::sessions_from_events(events);
    s.num_sessions = sessions.size();
    std::vector<double> lengths, uniques, switches;
    for (const auto& sess : sessions) {
        lengths.push_back(static_cast<double>(sess.end - sess.start));
        std::set<std::string> in_session;
        double n_switches = 0.0;
        for (std::size_t i = 0; i < sess.item_indices.size(); ++i) {
            in_session.insert(events[sess.item_indices[i]].app_id);
            if (i > 0 && events[sess.item_indices[i]].app_id !=
                             events[sess.item_indices[i - 1]].app_id) {
                n_switches += 1.0;
            }
        }
        uniques.push_back(static_cast<double>(in_session.size()));
        switches.push_back(n_switches);
    }
    s.mean_session_seconds = summarize(lengths).mean;
    s.median_session_seconds = median(lengths);
    s.mean_unique_apps_per_session = summarize(uniques).mean;
    s.median_unique_apps_per_session = median(uniques);
    s.mean_app_switches_per_session = summarize(switches).mean;
    s.median_app_switches_per_session = median(switches);
    return s;
}

void write_transitions_tsv(const std::string& path, const TransitionModel& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write transitions: " + path);
    out << "src\tdst\tprobability\n";
    char buf[64];
    for (const auto& e : model.edges_over_threshold()) {
        std::snprintf(buf, sizeof(buf), "%.6f", e.probability);
        out << e.src << '\t' << e.dst << '\t' << buf << '\n';
    }
}

void write_cooccurrence_tsv(const std::string& path, const CooccurrenceMatrix& matrix) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write cooccurrence: " + path);
    const num::Matrix disp = matrix.display();
    out << "app";
    for (const auto& a : matrix.apps) out << '\t' << a;
    out << '\n';
    char buf[64];
    for (int r = 0; r < disp.rows; ++r) {
        out << matrix.apps[static_cast<std::size_t>(r)];
        for (int c = 0; c < disp.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.8f", disp.at(r, c));
            out << '\t' << buf;
        }
        out << '\n';
    }
}

void write_overlap_tsv(const std::string& path, const OverlapReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write overlap report: " + path);
    out << "app\tqueries";
    for (const auto& [tau, pct] : report.all.pct_by_threshold) out << "\t>" << tau;
    out << '\n';
    auto row = [&](const OverlapRow& r) {
        out << r.app << '\t' << r.num_queries;
        char buf[32];
        for (const auto& [tau, pct] : r.pct_by_threshold) {
            std::snprintf(buf, sizeof(buf), "%.1f", pct);
            out << '\t' << buf;
        }
        out << '\n';
    };
    row(report.all);
    for (const auto& r : report.per_app) row(r);
}

void write_context_rank_tsv(const std::string& path, const ContextRankHistogram& hist) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write context rank histogram: " + path);
    out << "rank\tcount\tfraction\n";
    char buf[32];
    for (std::size_t r = 1; r <= hist.counts.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "%.6f", hist.fraction_at_rank(r));
        out << r << '\t' << hist.counts[r - 1] << '\t' << buf << '\n';
    }
    out << "unseen\t" << hist.overflow << '\t';
    std::snprintf(buf, sizeof(buf), "%.6f",
                  hist.total() == 0
                      ? 0.0
                      : static_cast<double>(hist.overflow) / static_cast<double>(hist.total()));
    out << buf << '\n';
}

namespace {

nlohmann::json stat_json(const SummaryStat& s) {
    return {{"mean", s.mean}, {"sd", s.sd}};
}

}  // namespace

std::string stats_to_json(const QueryDatasetStats& s) {
    nlohmann::json j;
    j["num_queries"] = s.num_queries;
    j["num_unique_queries"] = s.num_unique_queries;
    j["num_users"] = s.num_users;
    j["num_unique_apps"] = s.num_unique_apps;
    j["num_sessions"] = s.num_sessions;
    j["num_days"] = s.num_days;
    j["queries_per_user"] = stat_json(s.queries_per_user);
    j["queries_per_session"] = stat_json(s.queries_per_session);
    j["queries_per_day"] = stat_json(s.queries_per_day);
    j["report_days_per_user"] = stat_json(s.report_days_per_user);
    j["unique_apps_per_user"] = stat_json(s.unique_apps_per_user);
    j["query_terms"] = stat_json(s.query_terms);
    j["query_chars"] = stat_json(s.query_chars);
    j["sd_convention"] = "population";
    return j.dump(2);
}

std::string stats_to_json(const UsageDatasetStats& s) {
    nlohmann::json j;
    j["num_records"] = s.num_records;
    j["num_sessions"] = s.num_sessions;
    j["num_unique_apps"] = s.num_unique_apps;
    j["num_users"] = s.num_users;
    j["mean_duration_days_per_user"] = s.mean_duration_days_per_user;
    j["mean_session_seconds"] = s.mean_session_seconds;
    j["median_session_seconds"] = s.median_session_seconds;
    j["mean_unique_apps_per_session"] = s.mean_unique_apps_per_session;
    j["median_unique_apps_per_session"] = s.median_unique_apps_per_session;
    j["mean_app_switches_per_session"] = s.mean_app_switches_per_session;
    j["median_app_switches_per_session"] = s.median_app_switches_per_session;
    j["sd_convention"] = "population";
    return j.dump(2);
}

}  // namespace apprank::analysis
