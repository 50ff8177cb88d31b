#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "apprank/context.hpp"
#include "apprank/types.hpp"

// Non-neural rankers for both tasks plus the contextual interpolation
// filter ("-CR").
namespace apprank::baselines {

// One retrieval document per app, aggregated from its training queries.
struct AppDocument {
    std::string app_id;
    std::map<std::string, std::uint64_t> term_counts;
    std::uint64_t length = 0;  // total tokens
};

class AppDocumentIndex {
public:
    // tokens of each training query plus its labeled app
    static AppDocumentIndex build(const std::vector<std::vector<std::string>>& query_tokens,
                                  const std::vector<std::string>& apps);

    const std::vector<AppDocument>& docs() const { return docs_; }
    std::uint64_t collection_length() const { return collection_length_; }
    std::uint64_t collection_freq(const std::string& term) const;
    std::uint64_t doc_freq(const std::string& term) const;

private:
    std::vector<AppDocument> docs_;  // sorted by app_id
    std::unordered_map<std::string, std::uint64_t> collection_freqs_;
    std::unordered_map<std::string, std::uint64_t> doc_freqs_;
    std::uint64_t collection_length_ = 0;
};

// App frequencies in training data; the seed for MFU ordering.
std::map<std::string, std::uint64_t> app_frequencies(const std::vector<QueryRecord>& records,
                                                     const std::vector<std::size_t>& indices);
std::map<std::string, std::uint64_t> app_frequencies(const std::vector<UsageEvent>& events,
                                                     const std::vector<std::size_t>& indices);

// Static popularity ranking: frequency descending, ties by app id.
RankedPrediction mfu_rank(const std::map<std::string, std::uint64_t>& train_freq);

// Apps by recency of last use strictly before t, most recent first; apps
// never used before t follow in MFU order.
RankedPrediction mru_rank(const std::vector<UsageEvent>& history, Timestamp t,
                          const RankedPrediction& mfu_order);

inline constexpr double kDefaultDirichletMu = 2000.0;

// Query likelihood with Dirichlet smoothing. Terms unseen in the whole
// collection are skipped so they cannot produce -inf scores.
RankedPrediction querylm_rank(const std::vector<std::string>& query_tokens,
                              const AppDocumentIndex& index, double mu = kDefaultDirichletMu);

// BM25 with idf = ln((N - df + 0.5) / (df + 0.5) + 1).
RankedPrediction bm25_rank(const std::vector<std::string>& query_tokens,
                           const AppDocumentIndex& index, double k1 = 1.2, double b = 0.75);

// Pre-trained token vectors, one "token v1 ... vd" line per token.
// Dimensionality is fixed by the first line; lookups of missing tokens
// yield the zero vector.
class EmbeddingTable {
public:
    static EmbeddingTable load(const std::string& path);
    static EmbeddingTable from_entries(
        const std::vector<std::pair<std::string, std::vector<double>>>& entries);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    // Mean of the token vectors; misses contribute zero but still count in
    // the mean, and an all-miss query yields the zero vector.
    std::vector<double> mean_embedding(const std::vector<std::string>& tokens) const;

private:
    std::unordered_map<std::string, std::vector<double>> vectors_;
    std::size_t dim_ = 0;
};

// Labeled training queries for the two k-NN rankers.
class KnnIndex {
public:
    static KnnIndex build(const std::vector<std::vector<std::string>>& query_tokens,
                          const std::vector<std::string>& apps);

    // Cosine over TF-IDF vectors; app score is the summed similarity of its
    // queries among the K nearest. Unscored apps follow in MFU order.
    RankedPrediction rank_tfidf(const std::vector<std::string>& query_tokens, std::size_t k,
                                const RankedPrediction& mfu_order) const;

    // Cosine over average word embeddings.
    RankedPrediction rank_awe(const std::vector<std::string>& query_tokens,
                              const EmbeddingTable& table, std::size_t k,
                              const RankedPrediction& mfu_order) const;

    std::size_t size() const { return apps_.size(); }

private:
    std::vector<std::unordered_map<std::string, double>> tf_;
    std::vector<std::vector<std::string>> tokens_;
    std::vector<std::string> apps_;
    std::unordered_map<std::string, std::uint64_t> doc_freqs_;

    double idf(const std::string& term) const;
    std::unordered_map<std::string, double> tfidf(const std::vector<std::string>& tokens) const;
};

// Linear interpolation of min-max normalized base scores with min-max
// normalized 24h usage seconds: lambda * context + (1 - lambda) * base.
// Re-ranking is stable, so lambda = 0 reproduces the base order exactly.
RankedPrediction context_filter_cr(const RankedPrediction& base,
                                   const context::UsageContextDistribution& dist, double lambda);

}  // namespace apprank::baselines
