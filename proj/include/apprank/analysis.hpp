#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apprank/context.hpp"
#include "apprank/dataio.hpp"
#include "apprank/numcore.hpp"
#include "apprank/types.hpp"

// Descriptive analyses over query and usage logs: term overlap, session
// transition models, co-occurrence, context-rank histograms and dataset
// statistics.
namespace apprank::analysis {

// Jaccard overlap of the two term sets; 0 when both are empty.
double query_overlap(const std::vector<std::string>& q1_tokens,
                     const std::vector<std::string>& q2_tokens);

struct OverlapRow {
    std::string app;  // "All" for the pooled row
    std::size_t num_queries = 0;
    // threshold -> percentage of queries with some *other* query above it
    std::map<double, double> pct_by_threshold;
};

struct OverlapReport {
    OverlapRow all;
    std::vector<OverlapRow> per_app;  // sorted by app id
};

OverlapReport overlap_report(const std::vector<QueryRecord>& records,
                             const std::vector<double>& thresholds = {0.25, 0.5, 0.75});

inline constexpr const char* kStartState = "<start>";
inline constexpr const char* kUnknownCategory = "Unknown";

enum class TransitionLevel { app, category };

using CategoryMap = std::map<std::string, std::string>;

// TSV: app_id <tab> category, with header.
CategoryMap load_category_map(const std::string& path);

struct TransitionEdge {
    std::string src, dst;
    double probability = 0.0;
};

struct TransitionModel {
    std::vector<std::string> states;  // state 0 is kStartState
    num::Matrix probs;                // row-stochastic where observed
    std::vector<std::uint64_t> row_counts;
    double threshold = 0.05;

    int index_of(const std::string& state) const;
    // edges with probability strictly over the threshold
    std::vector<TransitionEdge> edges_over_threshold() const;
};

// Counts consecutive within-session pairs plus a start-of-session
// transition, normalized per row. Category level maps apps through the
// category map (missing apps become "Unknown").
TransitionModel markov_transitions(const std::vector<UsageEvent>& events,
                                   const std::vector<dataio::Session>& sessions,
                                   TransitionLevel level = TransitionLevel::app,
                                   const CategoryMap* categories = nullptr,
                                   double threshold = 0.05);

struct CooccurrenceMatrix {
    std::vector<std::string> apps;
    num::Matrix normalized;  // symmetric, entries sum to 1

    num::Matrix display() const;  // diagonal zeroed for heat maps
    int index_of(const std::string& app) const;
};

// Apps co-occurring in the same session: each unordered distinct pair
// counts once per session (mirrored into both cells), each present app
// counts once on the diagonal.
CooccurrenceMatrix cooccurrence(const std::vector<UsageEvent>& events,
                                const std::vector<dataio::Session>& sessions);

struct ContextRankHistogram {
    std::vector<std::uint64_t> counts;  // counts[r-1] = queries whose target ranked r
    std::uint64_t overflow = 0;         // target absent from the 24h usage

    std::uint64_t total() const;
    double fraction_at_rank(std::size_t rank) const;
};

// Rank of each query's target app within the user's usage-time ordering at
// query time (rank 1 = most used, ties by app id).
ContextRankHistogram context_rank_histogram(const std::vector<QueryRecord>& records,
                                            const context::UsageStatsTable& stats);

struct SummaryStat {
    double mean = 0.0;
    double sd = 0.0;  // population standard deviation
};

struct QueryDatasetStats {
    std::size_t num_queries = 0;
    std::size_t num_unique_queries = 0;
    std::size_t num_users = 0;
    std::size_t num_unique_apps = 0;
    std::size_t num_sessions = 0;
    std::size_t num_days = 0;  // distinct UTC days with data
    SummaryStat queries_per_user;
    SummaryStat queries_per_session;
    SummaryStat queries_per_day;
    SummaryStat report_days_per_user;
    SummaryStat unique_apps_per_user;
    SummaryStat query_terms;
    SummaryStat query_chars;
};

QueryDatasetStats descriptive_stats(const std::vector<QueryRecord>& records);

struct UsageDatasetStats {
    std::size_t num_records = 0;
    std::size_t num_sessions = 0;
    std::size_t num_unique_apps = 0;
    std::size_t num_users = 0;
    double mean_duration_days_per_user = 0.0;
    double mean_session_seconds = 0.0;
    double median_session_seconds = 0.0;
    double mean_unique_apps_per_session = 0.0;
    double median_unique_apps_per_session = 0.0;
    double mean_app_switches_per_session = 0.0;
    double median_app_switches_per_session = 0.0;
};

UsageDatasetStats descriptive_usage_stats(const std::vector<UsageEvent>& events);

// src <tab> dst <tab> probability, filtered at the model threshold.
void write_transitions_tsv(const std::string& path, const TransitionModel& model);
void write_cooccurrence_tsv(const std::string& path, const CooccurrenceMatrix& matrix);
void write_overlap_tsv(const std::string& path, const OverlapReport& report);
void write_context_rank_tsv(const std::string& path, const ContextRankHistogram& hist);
std::string stats_to_json(const QueryDatasetStats& stats);
std::string stats_to_json(const UsageDatasetStats& stats);

}  // namespace apprank::analysis
