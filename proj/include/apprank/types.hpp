#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace apprank {

using Timestamp = std::int64_t;  // epoch seconds, UTC

struct QueryRecord {
    std::string user_id;
    Timestamp timestamp = 0;
    std::string query;
    std::string target_app;
};

enum class EventKind { launch, interact, close, install, uninstall };

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);  // throws std::invalid_argument

struct UsageEvent {
    std::string user_id;
    Timestamp timestamp = 0;
    std::string app_id;
    EventKind kind = EventKind::launch;
};

// One row of a usage-statistics snapshot: seconds spent on app_id in the
// 24 hours before snapshot_timestamp.
struct UsageStat {
    std::string user_id;
    Timestamp snapshot_timestamp = 0;
    std::string app_id;
    double seconds_in_past_24h = 0.0;
};

struct ScoredApp {
    std::string app_id;
    double score = 0.0;
};

// Apps ordered best-first. Producers are responsible for tie-breaking.
struct RankedPrediction {
    std::vector<ScoredApp> items;

    bool empty() const { return items.empty(); }
    std::size_t size() const { return items.size(); }
    const ScoredApp& operator[](std::size_t i) const { return items[i]; }
};

// Rank (1-based) of app_id in the prediction, or 0 if absent.
std::size_t rank_of(const RankedPrediction& pred, const std::string& app_id);

}  // namespace apprank
