#include "apprank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace apprank::metrics {

namespace {

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double reciprocal_rank(const RankedPrediction& pred, const std::string& relevant) {
    const std::size_t rank = rank_of(pred, relevant);
    return rank == 0 ? 0.0 : 1.0 / static_cast<double>(rank);
}

double ndcg_at_k(const RankedPrediction& pred, const std::string& relevant, int k) {
    const std::size_t rank = rank_of(pred, relevant);
    if (rank == 0 || rank > static_cast<std::size_t>(k)) return 0.0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

double recall_at_k(const RankedPrediction& pred, const std::string& relevant, int k) {
    const std::size_t rank = rank_of(pred, relevant);
    return (rank != 0 && rank <= static_cast<std::size_t>(k)) ? 1.0 : 0.0;
}

double EvalResult::mrr() const { return mean(rr); }
double EvalResult::mean_ndcg1() const { return mean(ndcg1); }
double EvalResult::mean_ndcg3() const { return mean(ndcg3); }
double EvalResult::mean_ndcg5() const { return mean(ndcg5); }
double EvalResult::mean_recall3() const { return mean(recall3); }
double EvalResult::mean_recall5() const { return mean(recall5); }

EvalResult evaluate_rankings(const std::string& system,
                             const std::vector<RankedPrediction>& rankings,
                             const std::vector<std::string>& relevant) {
    if (rankings.size() != relevant.size()) {
        throw std::invalid_argument("evaluate_rankings: rankings/relevant size mismatch");
    }
    EvalResult r;
    r.system = system;
    r.rr.reserve(rankings.size());
    for (std::size_t i = 0; i < rankings.size(); ++i) {
        r.rr.push_back(reciprocal_rank(rankings[i], relevant[i]));
        r.ndcg1.push_back(ndcg_at_k(rankings[i], relevant[i], 1));
        r.ndcg3.push_back(ndcg_at_k(rankings[i], relevant[i], 3));
        r.ndcg5.push_back(ndcg_at_k(rankings[i], relevant[i], 5));
        r.recall3.push_back(recall_at_k(rankings[i], relevant[i], 3));
        r.recall5.push_back(recall_at_k(rankings[i], relevant[i], 5));
    }
    return r;
}

namespace {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// continued fraction for the regularized incomplete beta (modified Lentz)
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-14;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double reg_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * beta_cf(a, b, x) / a;
    }
    return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_two_tailed_p(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("student_t_two_tailed_p: df must be positive");
    const double x = df / (df + t * t);
    return reg_incomplete_beta(df / 2.0, 0.5, x);
}

TTestResult paired_ttest(const std::vector<double>& a, const std::vector<double>& b,
                         int num_comparisons, double alpha) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_ttest: size mismatch");
    if (a.size() < 2) throw std::invalid_argument("paired_ttest: need at least 2 pairs");
    if (num_comparisons < 1) num_comparisons = 1;

    const std::size_t n = a.size();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
    const double md = mean(diff);
    double ss = 0.0;
    for (double d : diff) ss += (d - md) * (d - md);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestResult r;
    const double threshold = alpha / num_comparisons;
    if (sd == 0.0) {
        r.degenerate_variance = true;
        if (md == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = md > 0.0 ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
        }
        r.significant = r.p < threshold;
        return r;
    }
    r.t = md / (sd / std::sqrt(static_cast<double>(n)));
    r.p = student_t_two_tailed_p(r.t, static_cast<double>(n - 1));
    r.significant = r.p < threshold;
    return r;
}

DeltaBreakdown delta_breakdown(const std::vector<double>& rr_a, const std::vector<double>& rr_b,
                               const std::vector<std::string>& group_keys) {
    if (rr_a.size() != rr_b.size() || rr_a.size() != group_keys.size()) {
        throw std::invalid_argument("delta_breakdown: size mismatch");
    }
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (std::size_t i = 0; i < rr_a.size(); ++i) {
        auto& g = groups[group_keys[i]];
        g.first.push_back(rr_a[i]);
        g.second.push_back(rr_b[i]);
    }
    DeltaBreakdown out;
    std::size_t improved = 0;
    for (const auto& [key, g] : groups) {
        DeltaRow row;
        row.group = key;
        row.delta = mean(g.first) - mean(g.second);
        row.instances = g.first.size();
        if (row.delta > 0.0) ++improved;
        out.rows.push_back(std::move(row));
    }
    std::sort(out.rows.begin(), out.rows.end(), [](const DeltaRow& x, const DeltaRow& y) {
        if (x.delta != y.delta) return x.delta > y.delta;
        return x.group < y.group;
    });
    out.improved_fraction =
        groups.empty() ? 0.0 : static_cast<double>(improved) / static_cast<double>(groups.size());
    return out;
}

const char* LengthBuckets::label(std::size_t b) {
    static const char* kLabels[3] = {"Short", "Med.", "Long"};
    return kLabels[b];
}

LengthBuckets length_buckets(const std::vector<std::size_t>& token_counts,
                             const std::vector<double>& rr) {
    if (token_counts.size() != rr.size()) {
        throw std::invalid_argument("length_buckets: size mismatch");
    }
    const std::size_t n = token_counts.size();
    if (n < 3) throw std::invalid_argument("length_buckets: need at least 3 queries");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return token_counts[a] < token_counts[b];
    });

    LengthBuckets out;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < 3; ++b) {
        std::size_t size = n / 3 + (b < n % 3 ? 1 : 0);  // remainders to earlier buckets
        double acc = 0.0;
        for (std::size_t k = 0; k < size; ++k, ++pos) {
            out.instance_indices[b].push_back(order[pos]);
            acc += rr[order[pos]];
        }
        out.mrr[b] = size == 0 ? 0.0 : acc / static_cast<double>(size);
    }
    return out;
}

SignificanceTable significance_vs_baselines(const std::vector<EvalResult>& results,
                                            const std::string& reference, double alpha) {
    const EvalResult* ref = nullptr;
    for (const auto& r : results) {
        if (r.system == reference) ref = &r;
    }
    if (ref == nullptr) throw std::invalid_argument("reference system not found: " + reference);

    SignificanceTable table;
    table.reference = reference;
    table.alpha = alpha;
    table.num_comparisons = static_cast<int>(results.size()) - 1;
    if (table.num_comparisons < 1) return table;

    const std::vector<std::pair<const char*, std::vector<double> EvalResult::*>> kMetrics = {
        {"mrr", &EvalResult::rr},         {"ndcg@1", &EvalResult::ndcg1},
        {"ndcg@3", &EvalResult::ndcg3},   {"ndcg@5", &EvalResult::ndcg5},
        {"recall@3", &EvalResult::recall3}, {"recall@5", &EvalResult::recall5}};

    for (const auto& r : results) {
        if (r.system == reference) continue;
        for (const auto& [name, member] : kMetrics) {
            SignificanceEntry entry;
            entry.baseline = r.system;
            entry.metric = name;
            entry.test = paired_ttest(ref->*member, r.*member, table.num_comparisons, alpha);
            table.entries.push_back(std::move(entry));
        }
    }
    return table;
}

void write_results_tsv(const std::string& path, const std::vector<EvalResult>& results) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write results: " + path);
    out << "system\tinstances\tmrr\tndcg@1\tndcg@3\tndcg@5\trecall@3\trecall@5\n";
    char buf[512];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof(buf), "%s\t%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n",
                      r.system.c_str(), r.count(), r.mrr(), r.mean_ndcg1(), r.mean_ndcg3(),
                      r.mean_ndcg5(), r.mean_recall3(), r.mean_recall5());
        out << buf;
    }
}

void write_results_json(const std::string& path, const std::vector<EvalResult>& results) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json s;
        s["system"] = r.system;
        s["instances"] = r.count();
        s["aggregates"] = {{"mrr", r.mrr()},
                           {"ndcg@1", r.mean_ndcg1()},
                           {"ndcg@3", r.mean_ndcg3()},
                           {"ndcg@5", r.mean_ndcg5()},
                           {"recall@3", r.mean_recall3()},
                           {"recall@5", r.mean_recall5()}};
        s["per_instance"] = {{"rr", r.rr},           {"ndcg@1", r.ndcg1},
                             {"ndcg@3", r.ndcg3},    {"ndcg@5", r.ndcg5},
                             {"recall@3", r.recall3}, {"recall@5", r.recall5}};
        j.push_back(std::move(s));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write results: " + path);
    out << j.dump(2) << "\n";
}

void write_significance_tsv(const std::string& path, const SignificanceTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write significance table: " + path);
    out << "# reference=" << table.reference << " alpha=" << table.alpha
        << " bonferroni_divisor=" << table.num_comparisons << "\n";
    out << "baseline\tmetric\tt\tp\tsignificant\tdegenerate_variance\n";
    char buf[512];
    for (const auto& e : table.entries) {
        std::snprintf(buf, sizeof(buf), "%s\t%s\t%.6f\t%.8f\t%d\t%d\n", e.baseline.c_str(),
                      e.metric.c_str(), e.test.t, e.test.p, e.test.significant ? 1 : 0,
                      e.test.degenerate_variance ? 1 : 0);
        out << buf;
    }
}

}  // namespace apprank::metrics
