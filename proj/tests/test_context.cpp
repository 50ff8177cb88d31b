#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "apprank/context.hpp"
#include "apprank/rng.hpp"

using namespace apprank;
using namespace apprank::context;

namespace {

void add_use(std::vector<UsageEvent>& events, const std::string& user, Timestamp start,
             Timestamp dur, const std::string& app) {
    events.push_back({user, start, app, EventKind::launch});
    events.push_back({user, start + dur, app, EventKind::close});
}

}  // namespace

TEST_CASE("usage distribution from launch/close pairs") {
    std::vector<UsageEvent> events;
    const Timestamp t = 200000;
    add_use(events, "u1", t - 10000, 3600, "a");
    add_use(events, "u1", t - 5000, 1800, "b");
    auto dist = usage_distribution_from_events(events, "u1", t);
    REQUIRE_FALSE(dist.empty);
    CHECK(dist.probs.at("a") == doctest::Approx(2.0 / 3.0));
    CHECK(dist.probs.at("b") == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("usage distribution empty window") {
    std::vector<UsageEvent> events;
    add_use(events, "u1", 1000, 600, "a");
    // all usage far before the window
    auto dist = usage_distribution_from_events(events, "u1", 1000 + 3 * 86400);
    CHECK(dist.empty);
    CHECK(dist.probs.empty());
}

TEST_CASE("usage straddling the window start is clipped") {
    std::vector<UsageEvent> events;
    const Timestamp t = 100000 + 86400;
    // starts 1000 s before the window, runs 3000 s into it
    add_use(events, "u1", 100000 - 1000, 4000, "a");
    add_use(events, "u1", 100000 + 10000, 3000, "b");
    auto dist = usage_distribution_from_events(events, "u1", t);
    CHECK(dist.probs.at("a") == doctest::Approx(0.5));
    CHECK(dist.probs.at("b") == doctest::Approx(0.5));
}

TEST_CASE("negative durations clamp and count") {
    std::vector<UsageEvent> events;
    events.push_back({"u1", 5000, "a", EventKind::launch});
    events.push_back({"u1", 4000, "a", EventKind::close});  // clock skew
    add_use(events, "u1", 6000, 100, "b");
    auto dist = usage_distribution_from_events(events, "u1", 10000, 86400);
    CHECK(dist.clamped_negative_durations == 1);
    CHECK(dist.probs.count("a") == 0);
    CHECK(dist.probs.at("b") == doctest::Approx(1.0));
}

TEST_CASE("distribution sums to one whenever usage exists") {
    RngStream rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<UsageEvent> events;
        Timestamp t = 50000;
        for (int i = 0; i < 30; ++i) {
            add_use(events, "u1", t - 40000 + static_cast<Timestamp>(rng.uniform_int(39000)),
                    1 + static_cast<Timestamp>(rng.uniform_int(900)),
                    "app" + std::to_string(rng.uniform_int(5)));
        }
        auto dist = usage_distribution_from_events(events, "u1", t, 86400);
        if (!dist.empty) {
            double sum = 0.0;
            for (const auto& [app, p] : dist.probs) {
                CHECK(p >= 0.0);
                sum += p;
            }
            CHECK(std::fabs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("stats table lookup prefers most recent snapshot at or before t") {
    std::vector<UsageStat> stats = {
        {"u1", 1000, "a", 100.0}, {"u1", 1000, "b", 300.0}, {"u1", 2000, "a", 50.0}};
    UsageStatsTable table(stats);
    CHECK(table.has_snapshot("u1", 1500));
    CHECK_FALSE(table.has_snapshot("u1", 999));
    CHECK_FALSE(table.has_snapshot("u2", 1500));

    auto dist = table.distribution("u1", 1500);
    CHECK(dist.probs.at("a") == doctest::Approx(0.25));
    CHECK(dist.probs.at("b") == doctest::Approx(0.75));

    auto later = table.distribution("u1", 5000);
    CHECK(later.probs.at("a") == doctest::Approx(1.0));
}

TEST_CASE("usage_distribution prefers stats then falls back to events") {
    std::vector<UsageStat> stats = {{"u1", 1000, "a", 10.0}};
    UsageStatsTable table(stats);
    std::vector<UsageEvent> events;
    add_use(events, "u1", 1100, 60, "b");

    auto from_stats = usage_distribution(&table, events, "u1", 1050);
    CHECK(from_stats.probs.count("a") == 1);

    auto from_events = usage_distribution(&table, events, "u2", 2000);
    CHECK(from_events.empty);

    std::vector<UsageStat> none;
    UsageStatsTable empty_table(none);
    auto fallback = usage_distribution(&empty_table, events, "u1", 2000);
    CHECK(fallback.probs.count("b") == 1);
}

TEST_CASE("time bins") {
    CHECK(time_bin(13 * 3600 + 1800).index == 4);  // 13:30
    CHECK(time_bin(0).index == 0);
    CHECK(time_bin(23 * 3600 + 59 * 60).index == 7);
    // same instant, offsets three hours apart land in adjacent bins
    const Timestamp t = 1600000000;
    const int b0 = time_bin(t, 0).index;
    const int b1 = time_bin(t, 3 * 3600).index;
    CHECK((b1 - b0 + kNumTimeBins) % kNumTimeBins == 1);
    // negative local times still map into 0..7
    for (Timestamp x : {-1, -86400, -100000}) {
        const int b = time_bin(x).index;
        CHECK(b >= 0);
        CHECK(b <= 7);
    }
    // bins partition the day
    for (int h = 0; h < 24; ++h) CHECK(time_bin(h * 3600).index == h / 3);
}

TEST_CASE("recent apps window") {
    std::vector<UsageEvent> history = {{"u1", 10, "a", EventKind::launch},
                                       {"u1", 20, "b", EventKind::launch},
                                       {"u1", 30, "c", EventKind::launch}};
    auto window = recent_apps(history, 100, 9);
    REQUIRE(window.apps.size() == 9);
    for (int i = 0; i < 6; ++i) CHECK(window.apps[i] == kPadApp);
    CHECK(window.apps[6] == "a");
    CHECK(window.apps[7] == "b");
    CHECK(window.apps[8] == "c");

    std::vector<UsageEvent> longer;
    for (int i = 0; i < 12; ++i) longer.push_back({"u1", i + 1, "app" + std::to_string(i), EventKind::launch});
    auto win = recent_apps(longer, 100, 9);
    REQUIRE(win.apps.size() == 9);
    CHECK(win.apps.front() == "app3");
    CHECK(win.apps.back() == "app11");

    auto single = recent_apps(history, 25, 1);
    CHECK(single.apps == std::vector<std::string>{"b"});

    // records at exactly t are excluded
    auto cut = recent_apps(history, 30, 2);
    CHECK(cut.apps == std::vector<std::string>{"a", "b"});

    auto empty = recent_apps({}, 100, 3);
    CHECK(empty.apps == std::vector<std::string>{kPadApp, kPadApp, kPadApp});
}

TEST_CASE("context embedding") {
    num::Matrix rows(3, 2);
    rows.at(0, 0) = 1.0;
    rows.at(0, 1) = 2.0;
    rows.at(1, 0) = 3.0;
    rows.at(1, 1) = 4.0;
    auto row_of = [](const std::string& app) { return app == "a" ? 0 : 1; };

    UsageContextDistribution point;
    point.empty = false;
    point.probs = {{"a", 1.0}};
    auto e = context_embedding(point, rows, row_of);
    CHECK(e == num::Vec{1.0, 2.0});

    UsageContextDistribution half;
    half.empty = false;
    half.probs = {{"a", 0.5}, {"b", 0.5}};
    e = context_embedding(half, rows, row_of);
    CHECK(e == num::Vec{2.0, 3.0});

    UsageContextDistribution none;
    e = context_embedding(none, rows, row_of);
    CHECK(e == num::Vec{0.0, 0.0});
}

TEST_CASE("context embedding stays inside the convex hull norm bound") {
    RngStream rng(8);
    num::Matrix rows(4, 3);
    num::init_uniform(rows, rng, -2.0, 2.0);
    double max_norm = 0.0;
    for (int r = 0; r < rows.rows; ++r) {
        double n = 0.0;
        for (int c = 0; c < rows.cols; ++c) n += rows.at(r, c) * rows.at(r, c);
        max_norm = std::max(max_norm, std::sqrt(n));
    }
    auto row_of = [](const std::string& app) { return app.back() - '0'; };
    for (int trial = 0; trial < 20; ++trial) {
        UsageContextDistribution dist;
        dist.empty = false;
        double total = 0.0;
        std::vector<double> w(4);
        for (double& x : w) {
            x = rng.uniform();
            total += x;
        }
        for (int i = 0; i < 4; ++i) dist.probs["app" + std::to_string(i)] = w[i] / total;
        auto e = context_embedding(dist, rows, row_of);
        double n = 0.0;
        for (double v : e) n += v * v;
        CHECK(std::sqrt(n) <= max_norm + 1e-9);
    }
}

TEST_CASE("bin usage distribution aggregates one bin over all history") {
    std::vector<UsageEvent> events;
    // 02:00 on two different days -> bin 0; 13:00 -> bin 4
    add_use(events, "u1", 2 * 3600, 600, "night_app");
    add_use(events, "u1", 86400 + 2 * 3600, 600, "night_app");
    add_use(events, "u1", 13 * 3600, 1200, "day_app");
    auto night = bin_usage_distribution(events, "u1", 0);
    CHECK(night.probs.at("night_app") == doctest::Approx(1.0));
    auto day = bin_usage_distribution(events, "u1", 4);
    CHECK(day.probs.at("day_app") == doctest::Approx(1.0));
    auto other = bin_usage_distribution(events, "u1", 6);
    CHECK(other.empty);
}
