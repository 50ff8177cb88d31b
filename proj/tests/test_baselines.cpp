#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "apprank/baselines.hpp"
#include "apprank/rng.hpp"
#include "testutil.hpp"

using namespace apprank;
using namespace apprank::baselines;

namespace {

context::UsageContextDistribution dist_of(std::initializer_list<std::pair<const char*, double>> ps) {
    context::UsageContextDistribution d;
    d.empty = ps.size() == 0;
    for (const auto& [app, p] : ps) d.probs[app] = p;
    return d;
}

}  // namespace

TEST_CASE("mfu ranking") {
    auto pred = mfu_rank({{"a", 5}, {"b", 3}, {"c", 1}});
    REQUIRE(pred.size() == 3);
    CHECK(pred[0].app_id == "a");
    CHECK(pred[1].app_id == "b");
    CHECK(pred[2].app_id == "c");

    // ties by app id
    auto tied = mfu_rank({{"b", 2}, {"a", 2}});
    CHECK(tied[0].app_id == "a");
    CHECK(tied[1].app_id == "b");

    CHECK_THROWS_AS(mfu_rank({}), std::invalid_argument);
}

TEST_CASE("mru ranking") {
    const auto mfu = mfu_rank({{"a", 5}, {"b", 3}, {"c", 2}, {"d", 1}});
    std::vector<UsageEvent> history = {{"u1", 1, "a", EventKind::launch},
                                       {"u1", 2, "b", EventKind::launch}};
    auto pred = mru_rank(history, 100, mfu);
    CHECK(pred[0].app_id == "b");
    CHECK(pred[1].app_id == "a");
    // unseen apps appended in MFU order
    CHECK(pred[2].app_id == "c");
    CHECK(pred[3].app_id == "d");

    // an app used twice ranks by its latest use
    history.push_back({"u1", 50, "a", EventKind::launch});
    pred = mru_rank(history, 100, mfu);
    CHECK(pred[0].app_id == "a");

    // events at or after t are invisible
    pred = mru_rank(history, 2, mfu);
    CHECK(pred[0].app_id == "a");
    CHECK(pred.size() == 4);

    // empty history degenerates to MFU
    pred = mru_rank({}, 100, mfu);
    REQUIRE(pred.size() == 4);
    CHECK(pred[0].app_id == "a");
    CHECK(pred[1].app_id == "b");
}

TEST_CASE("querylm hand-computed two-doc corpus") {
    // app a holds queries [x x] and [y]; app b holds [z]
    auto index = AppDocumentIndex::build({{"x", "x"}, {"y"}, {"z"}}, {"a", "a", "b"});
    CHECK(index.collection_length() == 4);
    CHECK(index.collection_freq("x") == 2);

    auto pred = querylm_rank({"x"}, index, 2000.0);
    REQUIRE(pred.size() == 2);
    CHECK(pred[0].app_id == "a");
    // hand-plugged Dirichlet formula: ln((tf + mu p_c) / (|d| + mu))
    const double expected_a = std::log((2.0 + 2000.0 * (2.0 / 4.0)) / (3.0 + 2000.0));
    const double expected_b = std::log((0.0 + 2000.0 * (2.0 / 4.0)) / (1.0 + 2000.0));
    CHECK(pred[0].score == doctest::Approx(expected_a).epsilon(1e-12));
    CHECK(pred[1].score == doctest::Approx(expected_b).epsilon(1e-12));
}

TEST_CASE("querylm discriminative and degenerate cases") {
    auto index = AppDocumentIndex::build({{"maps", "route"}, {"video", "cats"}}, {"maps", "youtube"});
    // term appearing only in one app's document ranks it first
    auto pred = querylm_rank({"route"}, index);
    CHECK(pred[0].app_id == "maps");

    // all-unseen terms: every document scores equally, ties by id
    pred = querylm_rank({"qqqq"}, index);
    CHECK(pred[0].score == pred[1].score);
    CHECK(pred[0].app_id == "maps");  // id order
    CHECK(pred[1].app_id == "youtube");
}

TEST_CASE("bm25 hand-worked example") {
    auto index = AppDocumentIndex::build({{"x", "x"}, {"y"}, {"z"}}, {"a", "a", "b"});
    auto pred = bm25_rank({"x"}, index, 1.2, 0.75);
    REQUIRE(pred.size() == 2);
    CHECK(pred[0].app_id == "a");
    // idf = ln((2 - 1 + 0.5)/(1 + 0.5) + 1) = ln 2; dl = 3, avgdl = 2
    const double idf = std::log(2.0);
    const double norm = 2.0 + 1.2 * (1.0 - 0.75 + 0.75 * (3.0 / 2.0));
    const double expected = idf * (2.0 * (1.2 + 1.0) / norm);
    CHECK(pred[0].score == doctest::Approx(expected).epsilon(1e-9));
    CHECK(pred[1].score == 0.0);
}

TEST_CASE("bm25 corner cases") {
    // single-doc corpus, term present: positive score
    auto single = AppDocumentIndex::build({{"w"}}, {"only"});
    auto pred = bm25_rank({"w"}, single);
    CHECK(pred[0].score > 0.0);

    // term in every document: idf near zero but still positive
    auto everywhere = AppDocumentIndex::build({{"x"}, {"x"}}, {"a", "b"});
    pred = bm25_rank({"x"}, everywhere);
    CHECK(pred[0].score > 0.0);
    CHECK(pred[0].score < 0.2);
}

TEST_CASE("knn tfidf hand-worked aggregation") {
    // q1 "a b" -> X, q2 "a" -> Y, q3 "z" -> Y
    auto index = KnnIndex::build({{"a", "b"}, {"a"}, {"z"}}, {"X", "Y", "Y"});
    const auto mfu = mfu_rank({{"X", 1}, {"Y", 2}});

    auto pred = index.rank_tfidf({"a", "b"}, 2, mfu);
    REQUIRE(pred.size() == 2);
    // identical training query gives cosine 1 for X
    CHECK(pred[0].app_id == "X");
    CHECK(pred[0].score == doctest::Approx(1.0).epsilon(1e-12));

    // second neighbor similarity from first principles
    const double idf_a = std::log(4.0 / 3.0) + 1.0;
    const double idf_b = std::log(4.0 / 2.0) + 1.0;
    const double qnorm = std::sqrt(idf_a * idf_a + idf_b * idf_b);
    const double expected_y = idf_a / qnorm;  // cos(q, "a")
    CHECK(pred[1].app_id == "Y");
    CHECK(pred[1].score == doctest::Approx(expected_y).epsilon(1e-12));
}

TEST_CASE("knn tfidf orthogonal query falls back to mfu") {
    auto index = KnnIndex::build({{"a"}, {"b"}}, {"X", "Y"});
    const auto mfu = mfu_rank({{"X", 1}, {"Y", 5}});
    auto pred = index.rank_tfidf({"nope"}, 2, mfu);
    REQUIRE(pred.size() == 2);
    CHECK(pred[0].app_id == "Y");  // MFU order
    CHECK(pred[0].score == 0.0);
}

TEST_CASE("knn duplicate of the nearest neighbor never hurts its app") {
    const auto mfu = mfu_rank({{"X", 1}, {"Y", 1}, {"Z", 1}});
    auto base = KnnIndex::build({{"a", "b"}, {"a", "c"}, {"d"}}, {"X", "Y", "Z"});
    auto with_dup = KnnIndex::build({{"a", "b"}, {"a", "b"}, {"a", "c"}, {"d"}},
                                    {"X", "X", "Y", "Z"});
    auto r1 = base.rank_tfidf({"a", "b"}, 3, mfu);
    auto r2 = with_dup.rank_tfidf({"a", "b"}, 3, mfu);
    CHECK(rank_of(r2, "X") <= rank_of(r1, "X"));
}

TEST_CASE("knn awe with a two-dimensional toy table") {
    auto table = EmbeddingTable::from_entries({{"w1", {1.0, 0.0}}, {"w2", {0.0, 1.0}}});
    auto index = KnnIndex::build({{"w1"}, {"w1", "w2"}}, {"A", "B"});
    const auto mfu = mfu_rank({{"A", 1}, {"B", 1}});

    auto pred = index.rank_awe({"w1", "w2"}, table, 2, mfu);
    REQUIRE(pred.size() == 2);
    CHECK(pred[0].app_id == "B");
    CHECK(pred[0].score == doctest::Approx(1.0).epsilon(1e-12));
    // cos(mean(v1,v2), v1) = (1/2) / (sqrt(1/2) * 1) = 1/sqrt(2)
    CHECK(pred[1].score == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

    // identical query reproduces cosine 1
    pred = index.rank_awe({"w1"}, table, 1, mfu);
    CHECK(pred[0].app_id == "A");
    CHECK(pred[0].score == doctest::Approx(1.0));

    // all-OOV query: zero vector, cosine 0, MFU fallback
    pred = index.rank_awe({"unknown"}, table, 2, mfu);
    CHECK(pred[0].score == 0.0);
    CHECK(pred[0].app_id == "A");
}

TEST_CASE("embedding table io") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("vec.txt"), "alpha 1 0 0\nbeta 0 1 0\n");
    auto table = EmbeddingTable::load(dir.file("vec.txt"));
    CHECK(table.dim() == 3);
    CHECK(table.size() == 2);
    auto mean = table.mean_embedding({"alpha", "beta"});
    CHECK(mean[0] == doctest::Approx(0.5));
    CHECK(mean[1] == doctest::Approx(0.5));
    CHECK(mean[2] == doctest::Approx(0.0));
    // miss contributes zero to the mean
    mean = table.mean_embedding({"alpha", "nope"});
    CHECK(mean[0] == doctest::Approx(0.5));

    testutil::write_file(dir.file("ragged.txt"), "a 1 2\nb 1\n");
    CHECK_THROWS_AS(EmbeddingTable::load(dir.file("ragged.txt")), std::runtime_error);
    CHECK_THROWS_AS(EmbeddingTable::load(dir.file("missing.txt")), std::runtime_error);
}

TEST_CASE("context filter endpoints") {
    RankedPrediction base;
    base.items = {{"p", 0.9}, {"q", 0.5}, {"r", 0.1}};
    const auto ctx = dist_of({{"r", 0.7}, {"q", 0.3}});

    // lambda = 0 reproduces the base order exactly
    auto same = context_filter_cr(base, ctx, 0.0);
    REQUIRE(same.size() == 3);
    CHECK(same[0].app_id == "p");
    CHECK(same[1].app_id == "q");
    CHECK(same[2].app_id == "r");

    // lambda = 1 follows context usage ordering
    auto flipped = context_filter_cr(base, ctx, 1.0);
    CHECK(flipped[0].app_id == "r");
    CHECK(flipped[1].app_id == "q");
    CHECK(flipped[2].app_id == "p");

    CHECK_THROWS_AS(context_filter_cr(base, ctx, 1.5), std::invalid_argument);
}

TEST_CASE("context filter interpolates after min-max normalization") {
    RankedPrediction base;
    base.items = {{"p", 1.0}, {"q", 0.6}, {"r", 0.0}};
    // lambda 0.5: combined p = 0.5, q = 0.3, r = 0.5; the p/r tie keeps base order
    auto out = context_filter_cr(base, dist_of({{"r", 1.0}}), 0.5);
    CHECK(out[0].app_id == "p");
    CHECK(out[0].score == doctest::Approx(0.5));
    CHECK(out[1].app_id == "r");
    CHECK(out[1].score == doctest::Approx(0.5));
    CHECK(out[2].app_id == "q");
    CHECK(out[2].score == doctest::Approx(0.3));

    // heavier context weight flips the order outright
    out = context_filter_cr(base, dist_of({{"r", 1.0}}), 0.6);
    CHECK(out[0].app_id == "r");
    CHECK(out[0].score == doctest::Approx(0.6));
    CHECK(out[1].app_id == "p");
    CHECK(out[1].score == doctest::Approx(0.4));

    // all-equal base scores normalize to 0.5 and context decides
    RankedPrediction flat;
    flat.items = {{"a", 3.0}, {"b", 3.0}};
    out = context_filter_cr(flat, dist_of({{"b", 1.0}}), 0.5);
    CHECK(out[0].app_id == "b");

    // lambda 0 on ties preserves the base tie order (stable)
    out = context_filter_cr(flat, dist_of({{"b", 1.0}}), 0.0);
    CHECK(out[0].app_id == "a");
    CHECK(out[1].app_id == "b");
}

TEST_CASE("rankers permute the candidate set") {
    RngStream rng(77);
    auto index = AppDocumentIndex::build({{"m", "n"}, {"o"}, {"p", "q"}}, {"a1", "a2", "a3"});
    const auto mfu = mfu_rank({{"a1", 3}, {"a2", 2}, {"a3", 1}});
    auto knn = KnnIndex::build({{"m", "n"}, {"o"}, {"p"}}, {"a1", "a2", "a3"});
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::string> q;
        const char* words[] = {"m", "n", "o", "p", "q", "zz"};
        for (std::size_t i = 0; i < 1 + rng.uniform_int(3); ++i) {
            q.push_back(words[rng.uniform_int(6)]);
        }
        std::vector<RankedPrediction> preds;
        preds.push_back(querylm_rank(q, index));
        preds.push_back(bm25_rank(q, index));
        preds.push_back(knn.rank_tfidf(q, 2, mfu));
        for (const auto& pred : preds) {
            REQUIRE(pred.size() == 3);
            std::set<std::string> seen;
            for (const auto& item : pred.items) {
                CHECK(std::isfinite(item.score));
                seen.insert(item.app_id);
            }
            CHECK(seen.size() == 3);
        }
    }
}
