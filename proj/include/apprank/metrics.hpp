#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "apprank/types.hpp"

// Ranking metrics over binary single-relevant-item instances, paired
// significance testing, and the breakdown analyses.
namespace apprank::metrics {

// 1/rank of the relevant app, 0 when absent from the list.
double reciprocal_rank(const RankedPrediction& pred, const std::string& relevant);
// Binary gain at the relevant position discounted by log2(rank + 1); the
// ideal DCG is 1, so nDCG@k is the discount itself (or 0 outside the cutoff).
double ndcg_at_k(const RankedPrediction& pred, const std::string& relevant, int k);
// 1 if the relevant app is within the top k.
double recall_at_k(const RankedPrediction& pred, const std::string& relevant, int k);

struct EvalResult {
    std::string system;
    std::vector<double> rr, ndcg1, ndcg3, ndcg5, recall3, recall5;  // per instance

    std::size_t count() const { return rr.size(); }
    double mrr() const;
    double mean_ndcg1() const;
    double mean_ndcg3() const;
    double mean_ndcg5() const;
    double mean_recall3() const;
    double mean_recall5() const;
};

// Scores one system over aligned rankings/relevant lists.
EvalResult evaluate_rankings(const std::string& system,
                             const std::vector<RankedPrediction>& rankings,
                             const std::vector<std::string>& relevant);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    bool significant = false;
    bool degenerate_variance = false;
};

// Two-tailed paired t-test on per-instance scores, Bonferroni-corrected:
// significant iff p < alpha / num_comparisons. Zero-variance differences
// report p=1 when the mean difference is 0, else p=0 with the degenerate
// flag set.
TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b,
                         int num_comparisons = 1, double alpha = 0.05);

// Two-tailed p for a Student-t statistic, df degrees of freedom. Regularized
// incomplete beta via continued fraction, good to ~1e-8.
double student_t_two_tailed_p(double t, double df);

struct DeltaRow {
    std::string group;
    double delta = 0.0;  // MRR(A) - MRR(B)
    std::size_t instances = 0;
};

struct DeltaBreakdown {
    std::vector<DeltaRow> rows;  // sorted by delta descending
    double improved_fraction = 0.0;
};

// Per-group MRR difference between two systems over the same instances,
// grouped by the supplied key (target app or user id).
DeltaBreakdown delta_breakdown(const std::vector<double>& rr_a, const std::vector<double>& rr_b,
                               const std::vector<std::string>& group_keys);

struct LengthBuckets {
    // Short / Med. / Long, remainders go to the earlier buckets
    std::array<std::vector<std::size_t>, 3> instance_indices;
    std::array<double, 3> mrr{0.0, 0.0, 0.0};
    static const char* label(std::size_t b);
};

// Buckets instances by query token count (stable by instance index) into
// three evenly-sized groups and reports MRR per bucket.
LengthBuckets length_buckets(const std::vector<std::size_t>& token_counts,
                             const std::vector<double>& rr);

struct SignificanceEntry {
    std::string baseline;
    std::string metric;
    TTestResult test;
};

struct SignificanceTable {
    std::string reference;
    int num_comparisons = 0;  // Bonferroni divisor, recorded in output
    double alpha = 0.05;
    std::vector<SignificanceEntry> entries;
};

// Tests the reference system against every other system on each metric.
SignificanceTable significance_vs_baselines(const std::vector<EvalResult>& results,
                                            const std::string& reference, double alpha = 0.05);

// One row per system with the aggregate metrics.
void write_results_tsv(const std::string& path, const std::vector<EvalResult>& results);
// Full per-instance detail for plotting.
void write_results_json(const std::string& path, const std::vector<EvalResult>& results);
void write_significance_tsv(const std::string& path, const SignificanceTable& table);

}  // namespace apprank::metrics
