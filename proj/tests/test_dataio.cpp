#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "apprank/dataio.hpp"
#include "apprank/rng.hpp"
#include "testutil.hpp"

using namespace apprank;
using namespace apprank::dataio;

namespace {

UsageEvent ev(const std::string& user, Timestamp t, const std::string& app,
              EventKind kind = EventKind::launch) {
    return UsageEvent{user, t, app, kind};
}

QueryRecord qr(const std::string& user, Timestamp t, const std::string& query,
               const std::string& app) {
    return QueryRecord{user, t, query, app};
}

}  // namespace

TEST_CASE("parse_query_log maps fields and collects errors") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("q.tsv"),
                         "user_id\ttimestamp\tquery\ttarget_app\n"
                         "u1\t1520000000\tjoe bonamassa\tyoutube\n"
                         "u2\t1520000100\t   \tmaps\n"  // empty query after trimming
                         "u3\t1520000200\tpizza near me\tmaps\n"
                         "u4\t1520000300\tweather\tweather_app\n");
    auto result = parse_query_log(dir.file("q.tsv"));
    REQUIRE(result.records.size() == 3);
    CHECK(result.records[0].user_id == "u1");
    CHECK(result.records[0].timestamp == 1520000000);
    CHECK(result.records[0].query == "joe bonamassa");
    CHECK(result.records[0].target_app == "youtube");
    REQUIRE(result.errors.size() == 1);
    CHECK(result.errors[0].line_no == 3);
}

TEST_CASE("parse_query_log hard failures") {
    testutil::TempDir dir;
    CHECK_THROWS_AS(parse_query_log(dir.file("missing.tsv")), std::runtime_error);
    testutil::write_file(dir.file("bad.tsv"), "wrong\theader\n");
    CHECK_THROWS_AS(parse_query_log(dir.file("bad.tsv")), std::runtime_error);
}

TEST_CASE("parse_usage_log validates kinds and timestamps") {
    testutil::TempDir dir;
    testutil::write_file(dir.file("u.tsv"),
                         "user_id\ttimestamp\tapp_id\tkind\n"
                         "u1\t100\tmaps\tlaunch\n"
                         "u1\t200\tmaps\tteleport\n"
                         "u1\t-5\tmaps\tclose\n"
                         "u1\t300\tmaps\tclose\n");
    auto result = parse_usage_log(dir.file("u.tsv"));
    CHECK(result.records.size() == 2);
    CHECK(result.errors.size() == 2);
}

TEST_CASE("query log roundtrip") {
    testutil::TempDir dir;
    std::vector<QueryRecord> records = {qr("u1", 10, "hello world", "maps"),
                                        qr("u2", 20, "tab\\free text", "chrome")};
    write_query_log(dir.file("q.tsv"), records);
    auto result = parse_query_log(dir.file("q.tsv"));
    REQUIRE(result.errors.empty());
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[1].query == "tab\\free text");
}

TEST_CASE("dedup merges close repeats of the same app") {
    auto out = dedup_usage({ev("u1", 1000, "a"), ev("u1", 1030, "a")});
    REQUIRE(out.size() == 1);
    CHECK(out[0].timestamp == 1000);

    // exactly 60 s apart stays two records
    out = dedup_usage({ev("u1", 1000, "a"), ev("u1", 1060, "a")});
    CHECK(out.size() == 2);

    out = dedup_usage({ev("u1", 1000, "a"), ev("u1", 1010, "b")});
    CHECK(out.size() == 2);

    // different users never merge
    out = dedup_usage({ev("u1", 1000, "a"), ev("u2", 1030, "a")});
    CHECK(out.size() == 2);
}

TEST_CASE("dedup rejects unsorted input") {
    CHECK_THROWS_AS(dedup_usage({ev("u1", 2000, "a"), ev("u1", 1000, "a")}),
                    std::invalid_argument);
    CHECK_THROWS_AS(dedup_usage({ev("u2", 1000, "a"), ev("u1", 2000, "a")}),
                    std::invalid_argument);
}

TEST_CASE("dedup is idempotent on random streams") {
    RngStream rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<UsageEvent> events;
        Timestamp t = 1000;
        for (int i = 0; i < 200; ++i) {
            t += static_cast<Timestamp>(rng.uniform_int(140));
            events.push_back(ev("u" + std::to_string(rng.uniform_int(2)), t,
                                "app" + std::to_string(rng.uniform_int(3))));
        }
        std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
            if (a.user_id != b.user_id) return a.user_id < b.user_id;
            return a.timestamp < b.timestamp;
        });
        auto once = dedup_usage(events);
        auto twice = dedup_usage(once);
        REQUIRE(once.size() == twice.size());
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(once[i].timestamp == twice[i].timestamp);
            CHECK(once[i].app_id == twice[i].app_id);
        }
    }
}

TEST_CASE("session segmentation thresholds") {
    auto sessions = segment_sessions("u1", {{0, 0}, {1, 240}, {2, 600}});
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].item_indices == std::vector<std::size_t>{0, 1});
    CHECK(sessions[1].item_indices == std::vector<std::size_t>{2});
    CHECK(sessions[0].start == 0);
    CHECK(sessions[0].end == 240);

    // gap of exactly 300 stays in-session
    sessions = segment_sessions("u1", {{0, 0}, {1, 300}});
    CHECK(sessions.size() == 1);

    sessions = segment_sessions("u1", {{0, 42}});
    REQUIRE(sessions.size() == 1);
    CHECK(sessions[0].item_indices.size() == 1);
}

TEST_CASE("sessions partition their input") {
    RngStream rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::pair<std::size_t, Timestamp>> items;
        Timestamp t = 5;
        const std::size_t n = 1 + rng.uniform_int(300);
        for (std::size_t i = 0; i < n; ++i) {
            t += static_cast<Timestamp>(rng.uniform_int(700));
            items.emplace_back(i, t);
        }
        auto sessions = segment_sessions("u", items);
        std::vector<std::size_t> flattened;
        for (const auto& s : sessions) {
            CHECK(s.end >= s.start);
            for (auto idx : s.item_indices) flattened.push_back(idx);
        }
        REQUIRE(flattened.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(flattened[i] == i);
    }
}

TEST_CASE("sessions_from_events groups per user") {
    std::vector<UsageEvent> events = {ev("u1", 0, "a"), ev("u2", 10, "b"), ev("u1", 1000, "a")};
    auto sessions = sessions_from_events(events);
    REQUIRE(sessions.size() == 3);
    CHECK(sessions[0].user_id == "u1");
    CHECK(sessions[1].user_id == "u1");
    CHECK(sessions[2].user_id == "u2");
}

TEST_CASE("istas_r split sizes and determinism") {
    auto split = split_istas_r(100, {0.7, 0.1, 0.2}, 13);
    CHECK(split.train.size() == 70);
    CHECK(split.validation.size() == 10);
    CHECK(split.test.size() == 20);

    auto again = split_istas_r(100, {0.7, 0.1, 0.2}, 13);
    CHECK(split.train == again.train);
    CHECK(split.validation == again.validation);
    CHECK(split.test == again.test);

    auto other = split_istas_r(100, {0.7, 0.1, 0.2}, 14);
    CHECK(split.train != other.train);

    // partition property
    std::set<std::size_t> all;
    for (auto i : split.train) all.insert(i);
    for (auto i : split.validation) all.insert(i);
    for (auto i : split.test) all.insert(i);
    CHECK(all.size() == 100);
    CHECK(*all.rbegin() == 99);

    CHECK_THROWS_AS(split_istas_r(0, {0.7, 0.1, 0.2}, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_istas_r(10, {0.5, 0.1, 0.2}, 1), std::invalid_argument);
}

TEST_CASE("istas_t splits chronologically per user") {
    std::vector<QueryRecord> records;
    for (int i = 0; i < 10; ++i) records.push_back(qr("u1", 100 + i, "q", "a"));
    records.push_back(qr("u2", 50, "solo", "b"));

    auto split = split_istas_t(records);
    // u1: 7 train / 1 valid / 2 test, u2: single query goes to train
    CHECK(split.train.size() == 8);
    CHECK(split.validation.size() == 1);
    CHECK(split.test.size() == 2);
    CHECK(std::find(split.train.begin(), split.train.end(), 10) != split.train.end());

    // chronology: max train timestamp <= min test timestamp per user
    Timestamp max_train = 0;
    for (auto i : split.train) {
        if (records[i].user_id == "u1") max_train = std::max(max_train, records[i].timestamp);
    }
    for (auto i : split.test) {
        if (records[i].user_id == "u1") CHECK(records[i].timestamp >= max_train);
    }
}

TEST_CASE("lsapp split sizes") {
    std::vector<UsageEvent> events;
    for (int i = 0; i < 20; ++i) events.push_back(ev("u1", 100 + i * 10, "a"));
    auto split = split_lsapp(events);
    CHECK(split.train.size() == 14);
    CHECK(split.validation.size() == 2);
    CHECK(split.test.size() == 4);
    CHECK(split.total() == 20);
}

TEST_CASE("split file roundtrip") {
    testutil::TempDir dir;
    auto split = split_istas_r(25, {0.7, 0.1, 0.2}, 77);
    write_split(split, dir.file("split.txt"));
    auto loaded = read_split(dir.file("split.txt"));
    CHECK(loaded.name == split.name);
    CHECK(loaded.seed == 77);
    CHECK(loaded.train == split.train);
    CHECK(loaded.validation == split.validation);
    CHECK(loaded.test == split.test);
}

TEST_CASE("tokenize") {
    CHECK(tokenize("Katy Perry hits") == std::vector<std::string>{"katy", "perry", "hits"});
    CHECK(tokenize("  hello ") == std::vector<std::string>{"hello"});
    CHECK(tokenize("A.B c") == std::vector<std::string>{"a.b", "c"});
    CHECK(tokenize("\"quoted\" (parens)") == std::vector<std::string>{"quoted", "parens"});
    CHECK(tokenize("...") == std::vector<std::string>{});
    CHECK(tokenize("").empty());
    // non-breaking space splits too
    CHECK(tokenize("a\xc2\xa0z") == std::vector<std::string>{"a", "z"});
}

TEST_CASE("vocabulary ids are dense and bijective") {
    Vocabulary v = Vocabulary::build({{"red", "green"}, {"green", "blue"}}, 1, true);
    CHECK(v.size() == 4);  // unk + 3 colors
    std::set<int> ids;
    for (const auto& tok : v.tokens()) {
        const int id = v.id_of(tok);
        CHECK(id >= 0);
        CHECK(v.token(id) == tok);
        ids.insert(id);
    }
    CHECK(ids.size() == v.size());
    CHECK(*ids.begin() == 0);
    CHECK(*ids.rbegin() == static_cast<int>(v.size()) - 1);

    CHECK(v.doc_freq(v.id_of("green")) == 2);
    CHECK(v.doc_freq(v.id_of("red")) == 1);
    CHECK(v.id_of("magenta") == -1);
    CHECK(v.id_or_unk("magenta") == v.unk_id());
}

TEST_CASE("vocabulary folds rare tokens into unk") {
    Vocabulary v = Vocabulary::build({{"a", "a", "b"}, {"a"}}, 2, true);
    CHECK(v.id_of("a") >= 0);
    CHECK(v.id_of("b") == -1);
    CHECK(v.id_or_unk("b") == v.unk_id());
}

TEST_CASE("vocabulary json roundtrip") {
    Vocabulary v = Vocabulary::build({{"x", "y"}, {"y"}}, 1, true);
    Vocabulary w = Vocabulary::from_json(v.to_json());
    CHECK(w.size() == v.size());
    CHECK(w.unk_id() == v.unk_id());
    CHECK(w.id_of("y") == v.id_of("y"));
    CHECK(w.doc_freq(w.id_of("y")) == 2);
}
