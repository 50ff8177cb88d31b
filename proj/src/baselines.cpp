#include "apprank/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace apprank::baselines {

namespace {

// score-descending with app-id tiebreak
void sort_ranked(RankedPrediction& pred) {
    std::sort(pred.items.begin(), pred.items.end(), [](const ScoredApp& a, const ScoredApp& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.app_id < b.app_id;
    });
}

double cosine(const std::unordered_map<std::string, double>& a,
              const std::unordered_map<std::string, double>& b) {
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    double dot = 0.0;
    for (const auto& [term, w] : small) {
        auto it = large.find(term);
        if (it != large.end()) dot += w * it->second;
    }
    double na = 0.0, nb = 0.0;
    for (const auto& [term, w] : a) na += w * w;
    for (const auto& [term, w] : b) nb += w * w;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// shared aggregation for both k-NN rankers: sims over training queries,
// top-k by similarity (ties by training index), summed per app
RankedPrediction aggregate_knn(const std::vector<double>& sims,
                               const std::vector<std::string>& apps, std::size_t k,
                               const RankedPrediction& mfu_order) {
    std::vector<std::size_t> order(sims.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
    if (order.size() > k) order.resize(k);

    std::map<std::string, double> scores;
    for (std::size_t i : order) {
        if (sims[i] > 0.0) scores[apps[i]] += sims[i];
    }

    // scored apps first, then the rest of the candidate set in MFU order
    RankedPrediction pred;
    std::vector<ScoredApp> scored;
    for (const auto& [app, s] : scores) scored.push_back({app, s});
    std::sort(scored.begin(), scored.end(), [](const ScoredApp& a, const ScoredApp& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.app_id < b.app_id;
    });
    pred.items = std::move(scored);
    for (const auto& item : mfu_order.items) {
        if (!scores.count(item.app_id)) pred.items.push_back({item.app_id, 0.0});
    }
    return pred;
}

}  // namespace

AppDocumentIndex AppDocumentIndex::build(const std::vector<std::vector<std::string>>& query_tokens,
                                         const std::vector<std::string>& apps) {
    if (query_tokens.size() != apps.size()) {
        throw std::invalid_argument("AppDocumentIndex::build: size mismatch");
    }
    AppDocumentIndex index;
    std::map<std::string, AppDocument> by_app;
    for (std::size_t i = 0; i < apps.size(); ++i) {
        AppDocument& doc = by_app[apps[i]];
        doc.app_id = apps[i];
        for (const auto& term : query_tokens[i]) {
            ++doc.term_counts[term];
            ++doc.length;
            ++index.collection_freqs_[term];
            ++index.collection_length_;
        }
    }
    for (auto& [app, doc] : by_app) {
        for (const auto& [term, count] : doc.term_counts) ++index.doc_freqs_[term];
        index.docs_.push_back(std::move(doc));
    }
    return index;
}

std::uint64_t AppDocumentIndex::collection_freq(const std::string& term) const {
    auto it = collection_freqs_.find(term);
    return it == collection_freqs_.end() ? 0 : it->second;
}

std::uint64_t AppDocumentIndex::doc_freq(const std::string& term) const {
    auto it = doc_freqs_.find(term);
    return it == doc_freqs_.end() ? 0 : it->second;
}

std::map<std::string, std::uint64_t> app_frequencies(const std::vector<QueryRecord>& records,
                                                     const std::vector<std::size_t>& indices) {
    std::map<std::string, std::uint64_t> freq;
    for (std::size_t i : indices) ++freq[records[i].target_app];
    return freq;
}

std::map<std::string, std::uint64_t> app_frequencies(const std::vector<UsageEvent>& events,
                                                     const std::vector<std::size_t>& indices) {
    std::map<std::string, std::uint64_t> freq;
    for (std::size_t i : indices) ++freq[events[i].app_id];
    return freq;
}

RankedPrediction mfu_rank(const std::map<std::string, std::uint64_t>& train_freq) {
    if (train_freq.empty()) throw std::invalid_argument("mfu_rank: empty training data");
    RankedPrediction pred;
    for (const auto& [app, count] : train_freq) {
        pred.items.push_back({app, static_cast<double>(count)});
    }
    sort_ranked(pred);
    return pred;
}

RankedPrediction mru_rank(const std::vector<UsageEvent>& history, Timestamp t,
                          const RankedPrediction& mfu_order) {
    std::map<std::string, Timestamp> last_use;
    for (const auto& e : history) {
        if (e.timestamp >= t) continue;
        auto [it, inserted] = last_use.try_emplace(e.app_id, e.timestamp);
        if (!inserted) it->second = std::max(it->second, e.timestamp);
    }
    std::vector<ScoredApp> recent;
    for (const auto& [app, ts] : last_use) recent.push_back({app, static_cast<double>(ts)});
    std::sort(recent.begin(), recent.end(), [](const ScoredApp& a, const ScoredApp& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.app_id < b.app_id;
    });
    RankedPrediction pred;
    pred.items = std::move(recent);
    for (const auto& item : mfu_order.items) {
        if (!last_use.count(item.app_id)) pred.items.push_back({item.app_id, 0.0});
    }
    return pred;
}

RankedPrediction querylm_rank(const std::vector<std::string>& query_tokens,
                              const AppDocumentIndex& index, double mu) {
    std::map<std::string, std::uint64_t> q_counts;
    for (const auto& t : query_tokens) ++q_counts[t];

    RankedPrediction pred;
    for (const auto& doc : index.docs()) {
        double score = 0.0;
        for (const auto& [term, q_count] : q_counts) {
            const std::uint64_t cf = index.collection_freq(term);
            if (cf == 0) continue;  // unseen in the collection carries no evidence
            const double p_collection =
                static_cast<double>(cf) / static_cast<double>(index.collection_length());
            auto it = doc.term_counts.find(term);
            const double tf = it == doc.term_counts.end() ? 0.0 : static_cast<double>(it->second);
            score += static_cast<double>(q_count) *
                     std::log((tf + mu * p_collection) /
                              (static_cast<double>(doc.length) + mu));
        }
        pred.items.push_back({doc.app_id, score});
    }
    sort_ranked(pred);
    return pred;
}

RankedPrediction bm25_rank(const std::vector<std::string>& query_tokens,
                           const AppDocumentIndex& index, double k1, double b) {
    std::map<std::string, std::uint64_t> q_counts;
    for (const auto& t : query_tokens) ++q_counts[t];

    const double n_docs = static_cast<double>(index.docs().size());
    double avgdl = 0.0;
    for (const auto& doc : index.docs()) avgdl += static_cast<double>(doc.length);
    avgdl = index.docs().empty() ? 0.0 : avgdl / n_docs;

    RankedPrediction pred;
    for (const auto& doc : index.docs()) {
        double score = 0.0;
        for (const auto& [term, q_count] : q_counts) {
            auto it = doc.term_counts.find(term);
            if (it == doc.term_counts.end()) continue;
            const double tf = static_cast<double>(it->second);
            const double df = static_cast<double>(index.doc_freq(term));
            const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
            const double dl = static_cast<double>(doc.length);
            const double norm = tf + k1 * (1.0 - b + b * (avgdl > 0.0 ? dl / avgdl : 0.0));
            score += static_cast<double>(q_count) * idf * (tf * (k1 + 1.0) / norm);
        }
        pred.items.push_back({doc.app_id, score});
    }
    sort_ranked(pred);
    return pred;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream iss(line);
        std::string token;
        iss >> token;
        std::vector<double> vec;
        double x;
        while (iss >> x) vec.push_back(x);
        if (vec.empty()) {
            throw std::runtime_error("embedding line " + std::to_string(line_no) +
                                     " has no values");
        }
        if (table.dim_ == 0) table.dim_ = vec.size();
        if (vec.size() != table.dim_) {
            throw std::runtime_error("embedding line " + std::to_string(line_no) +
                                     " has dimension " + std::to_string(vec.size()) +
                                     ", expected " + std::to_string(table.dim_));
        }
        table.vectors_[token] = std::move(vec);
    }
    return table;
}

EmbeddingTable EmbeddingTable::from_entries(
    const std::vector<std::pair<std::string, std::vector<double>>>& entries) {
    EmbeddingTable table;
    for (const auto& [token, vec] : entries) {
        if (table.dim_ == 0) table.dim_ = vec.size();
        if (vec.size() != table.dim_) {
            throw std::invalid_argument("embedding dimensions must be uniform");
        }
        table.vectors_[token] = vec;
    }
    return table;
}

std::vector<double> EmbeddingTable::mean_embedding(const std::vector<std::string>& tokens) const {
    std::vector<double> mean(dim_, 0.0);
    if (tokens.empty()) return mean;
    for (const auto& tok : tokens) {
        auto it = vectors_.find(tok);
        if (it == vectors_.end()) continue;  // miss contributes zero
        for (std::size_t i = 0; i < dim_; ++i) mean[i] += it->second[i];
    }
    for (double& v : mean) v /= static_cast<double>(tokens.size());
    return mean;
}

KnnIndex KnnIndex::build(const std::vector<std::vector<std::string>>& query_tokens,
                         const std::vector<std::string>& apps) {
    if (query_tokens.size() != apps.size()) {
        throw std::invalid_argument("KnnIndex::build: size mismatch");
    }
    KnnIndex index;
    index.tokens_ = query_tokens;
    index.apps_ = apps;
    for (const auto& tokens : query_tokens) {
        std::set<std::string> uniq(tokens.begin(), tokens.end());
        for (const auto& t : uniq) ++index.doc_freqs_[t];
    }
    index.tf_.reserve(query_tokens.size());
    for (const auto& tokens : query_tokens) {
        index.tf_.push_back(index.tfidf(tokens));
    }
    return index;
}

double KnnIndex::idf(const std::string& term) const {
    auto it = doc_freqs_.find(term);
    const double df = it == doc_freqs_.end() ? 0.0 : static_cast<double>(it->second);
    const double n = static_cast<double>(apps_.size());
    // smooth variant, strictly positive even at df = n
    return std::log((1.0 + n) / (1.0 + df)) + 1.0;
}

std::unordered_map<std::string, double> KnnIndex::tfidf(
    const std::vector<std::string>& tokens) const {
    std::unordered_map<std::string, double> vec;
    for (const auto& t : tokens) vec[t] += 1.0;
    for (auto& [term, w] : vec) w *= idf(term);
    return vec;
}

RankedPrediction KnnIndex::rank_tfidf(const std::vector<std::string>& query_tokens, std::size_t k,
                                      const RankedPrediction& mfu_order) const {
    if (k < 1) throw std::invalid_argument("rank_tfidf: k must be >= 1");
    const auto q = tfidf(query_tokens);
    std::vector<double> sims(tf_.size());
    for (std::size_t i = 0; i < tf_.size(); ++i) sims[i] = cosine(q, tf_[i]);
    return aggregate_knn(sims, apps_, k, mfu_order);
}

RankedPrediction KnnIndex::rank_awe(const std::vector<std::string>& query_tokens,
                                    const EmbeddingTable& table, std::size_t k,
                                    const RankedPrediction& mfu_order) const {
    if (k < 1) throw std::invalid_argument("rank_awe: k must be >= 1");
    const auto q = table.mean_embedding(query_tokens);
    std::vector<double> sims(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        sims[i] = cosine(q, table.mean_embedding(tokens_[i]));
    }
    return aggregate_knn(sims, apps_, k, mfu_order);
}

namespace {

// min-max to [0,1]; an all-equal vector maps to all 0.5
std::vector<double> min_max_normalize(const std::vector<double>& scores) {
    std::vector<double> out(scores.size(), 0.5);
    if (scores.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) return out;
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / (hi - lo);
    return out;
}

}  // namespace

RankedPrediction context_filter_cr(const RankedPrediction& base,
                                   const context::UsageContextDistribution& dist, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) {
        throw std::invalid_argument("context_filter_cr: lambda must be in [0, 1]");
    }
    std::vector<double> base_scores, ctx_scores;
    base_scores.reserve(base.items.size());
    ctx_scores.reserve(base.items.size());
    for (const auto& item : base.items) {
        base_scores.push_back(item.score);
        auto it = dist.probs.find(item.app_id);
        ctx_scores.push_back(it == dist.probs.end() ? 0.0 : it->second);
    }
    const auto nb = min_max_normalize(base_scores);
    const auto nc = min_max_normalize(ctx_scores);

    RankedPrediction out;
    out.items.resize(base.items.size());
    std::vector<std::size_t> order(base.items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> combined(base.items.size());
    for (std::size_t i = 0; i < combined.size(); ++i) {
        combined[i] = lambda * nc[i] + (1.0 - lambda) * nb[i];
    }
    // stable: ties keep the base ranker's order, so lambda = 0 is a no-op
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return combined[a] > combined[b]; });
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.items[i] = {base.items[order[i]].app_id, combined[order[i]]};
    }
    return out;
}

}  // namespace apprank::baselines
