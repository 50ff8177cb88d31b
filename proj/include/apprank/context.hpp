#pragma once

#include <map>
#include <string>
#include <vector>

#include "apprank/numcore.hpp"
#include "apprank/types.hpp"

// Contextual features consumed by the models: 24-hour usage distributions,
// 3-hour time bins, and recent-app windows.
namespace apprank::context {

// Probability of each app by time spent within a window. `empty` is set
// when no usage fell inside the window; probabilities then stay empty and
// downstream embeddings fall back to the zero vector.
struct UsageContextDistribution {
    std::map<std::string, double> probs;  // ordered for deterministic iteration
    std::string user_id;
    Timestamp window_start = 0;
    Timestamp window_end = 0;
    bool empty = true;
    std::size_t clamped_negative_durations = 0;
};

inline constexpr Timestamp kDayHorizonSeconds = 86400;

// Foreground seconds per app derived from launch/close pairs intersected
// with [t - horizon, t). Negative durations (clock skew) clamp to zero and
// are counted.
UsageContextDistribution usage_distribution_from_events(const std::vector<UsageEvent>& events,
                                                        const std::string& user_id, Timestamp t,
                                                        Timestamp horizon = kDayHorizonSeconds);

// Usage-statistics snapshots indexed by user; lookups resolve to the most
// recent snapshot at or before t.
class UsageStatsTable {
public:
    explicit UsageStatsTable(const std::vector<UsageStat>& stats);

    bool has_snapshot(const std::string& user_id, Timestamp t) const;
    UsageContextDistribution distribution(const std::string& user_id, Timestamp t) const;

private:
    // user -> snapshot timestamp -> (app -> seconds)
    std::map<std::string, std::map<Timestamp, std::map<std::string, double>>> snapshots_;
};

// Prefers a stats snapshot when one is available, else derives from events.
UsageContextDistribution usage_distribution(const UsageStatsTable* stats,
                                            const std::vector<UsageEvent>& events,
                                            const std::string& user_id, Timestamp t,
                                            Timestamp horizon = kDayHorizonSeconds);

struct TimeBin {
    int index = 0;  // 0..7, three hours each
};

inline constexpr int kNumTimeBins = 8;

// bin = floor(local hour / 3); local time = t + tz_offset_seconds.
TimeBin time_bin(Timestamp t, int tz_offset_seconds = 0);

// Exactly k app ids, oldest first, left-padded with pad_token when the
// history holds fewer than k records before t.
struct AppWindow {
    std::vector<std::string> apps;
    int k = 0;
};

inline constexpr int kDefaultWindowSize = 9;
inline constexpr const char* kPadApp = "<pad>";

// history must be time-sorted (post-dedup); takes records strictly before t.
AppWindow recent_apps(const std::vector<UsageEvent>& history, Timestamp t,
                      int k = kDefaultWindowSize, const std::string& pad_token = kPadApp);

// Probability-weighted sum of app rows; unknown apps use lookup_row's unk
// mapping; empty distribution yields the zero vector.
num::Vec context_embedding(const UsageContextDistribution& dist, const num::Matrix& app_matrix,
                           const std::function<int(const std::string&)>& row_of);

// Seconds per app spent in a given time bin over a whole event history,
// normalized; used by the optional bin-conditioned usage feature.
UsageContextDistribution bin_usage_distribution(const std::vector<UsageEvent>& events,
                                                const std::string& user_id, int bin_index,
                                                int tz_offset_seconds = 0);

}  // namespace apprank::context
