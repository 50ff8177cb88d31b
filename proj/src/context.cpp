#include "apprank/context.hpp"

#include <algorithm>
#include <cmath>

namespace apprank::context {

namespace {

UsageContextDistribution normalize_seconds(std::map<std::string, double> seconds,
                                           const std::string& user_id, Timestamp start,
                                           Timestamp end, std::size_t clamped) {
    UsageContextDistribution dist;
    dist.user_id = user_id;
    dist.window_start = start;
    dist.window_end = end;
    dist.clamped_negative_durations = clamped;
    double total = 0.0;
    for (const auto& [app, s] : seconds) total += s;
    if (total > 0.0) {
        dist.empty = false;
        for (const auto& [app, s] : seconds) {
            if (s > 0.0) dist.probs[app] = s / total;
        }
    }
    return dist;
}

}  // namespace

UsageContextDistribution usage_distribution_from_events(const std::vector<UsageEvent>& events,
                                                        const std::string& user_id, Timestamp t,
                                                        Timestamp horizon) {
    if (t <= 0) throw std::invalid_argument("usage_distribution: t must be positive");
    const Timestamp window_start = t - horizon;
    std::map<std::string, double> seconds;
    std::map<std::string, Timestamp> open_launch;  // app -> launch time
    std::size_t clamped = 0;

    for (const auto& e : events) {
        if (e.user_id != user_id) continue;
        if (e.kind == EventKind::launch) {
            open_launch[e.app_id] = e.timestamp;
        } else if (e.kind == EventKind::close) {
            auto it = open_launch.find(e.app_id);
            if (it == open_launch.end()) continue;
            Timestamp begin = it->second;
            Timestamp finish = e.timestamp;
            open_launch.erase(it);
            if (finish < begin) {
                ++clamped;
                continue;
            }
            // only the portion inside [t - horizon, t) counts
            const Timestamp lo = std::max(begin, window_start);
            const Timestamp hi = std::min(finish, t);
            if (hi > lo) seconds[e.app_id] += static_cast<double>(hi - lo);
        }
    }
    return normalize_seconds(std::move(seconds), user_id, window_start, t, clamped);
}

UsageStatsTable::UsageStatsTable(const std::vector<UsageStat>& stats) {
    for (const auto& s : stats) {
        snapshots_[s.user_id][s.snapshot_timestamp][s.app_id] += s.seconds_in_past_24h;
    }
}

bool UsageStatsTable::has_snapshot(const std::string& user_id, Timestamp t) const {
    auto it = snapshots_.find(user_id);
    if (it == snapshots_.end()) return false;
    auto snap = it->second.upper_bound(t);
    return snap != it->second.begin();
}

UsageContextDistribution UsageStatsTable::distribution(const std::string& user_id,
                                                       Timestamp t) const {
    auto it = snapshots_.find(user_id);
    if (it == snapshots_.end() || it->second.empty()) {
        UsageContextDistribution dist;
        dist.user_id = user_id;
        dist.window_start = t - kDayHorizonSeconds;
        dist.window_end = t;
        return dist;
    }
    auto snap = it->second.upper_bound(t);
    if (snap == it->second.begin()) {
        UsageContextDistribution dist;
        dist.user_id = user_id;
        dist.window_start = t - kDayHorizonSeconds;
        dist.window_end = t;
        return dist;
    }
    --snap;  // most recent snapshot at or before t
    std::size_t clamped = 0;
    std::map<std::string, double> seconds;
    for (const auto& [app, s] : snap->second) {
        if (s < 0.0) {
            ++clamped;
            continue;
        }
        seconds[app] = s;
    }
    return normalize_seconds(std::move(seconds), user_id, snap->first - kDayHorizonSeconds,
                             snap->first, clamped);
}

UsageContextDistribution usage_distribution(const UsageStatsTable* stats,
                                            const std::vector<UsageEvent>& events,
                                            const std::string& user_id, Timestamp t,
                                            Timestamp horizon) {
    if (stats != nullptr && stats->has_snapshot(user_id, t)) {
        return stats->distribution(user_id, t);
    }
    return usage_distribution_from_events(events, user_id, t, horizon);
}

TimeBin time_bin(Timestamp t, int tz_offset_seconds) {
    const Timestamp local = t + tz_offset_seconds;
    Timestamp seconds_of_day = local % kDayHorizonSeconds;
    if (seconds_of_day < 0) seconds_of_day += kDayHorizonSeconds;
    const int hour = static_cast<int>(seconds_of_day / 3600);
    return TimeBin{hour / 3};
}

AppWindow recent_apps(const std::vector<UsageEvent>& history, Timestamp t, int k,
                      const std::string& pad_token) {
    if (k < 1) throw std::invalid_argument("recent_apps: k must be >= 1");
    AppWindow window;
    window.k = k;
    std::vector<std::string> recent;
    for (const auto& e : history) {
        if (e.timestamp >= t) break;
        recent.push_back(e.app_id);
    }
    const std::size_t take = std::min<std::size_t>(recent.size(), static_cast<std::size_t>(k));
    window.apps.assign(static_cast<std::size_t>(k) - take, pad_token);
    window.apps.insert(window.apps.end(), recent.end() - take, recent.end());
    return window;
}

num::Vec context_embedding(const UsageContextDistribution& dist, const num::Matrix& app_matrix,
                           const std::function<int(const std::string&)>& row_of) {
    num::Vec out(static_cast<std::size_t>(app_matrix.cols), 0.0);
    if (dist.empty) return out;
    for (const auto& [app, p] : dist.probs) {
        const int row = row_of(app);
        const double* r = app_matrix.row(row);
        for (int c = 0; c < app_matrix.cols; ++c) out[c] += p * r[c];
    }
    return out;
}

UsageContextDistribution bin_usage_distribution(const std::vector<UsageEvent>& events,
                                                const std::string& user_id, int bin_index,
                                                int tz_offset_seconds) {
    std::map<std::string, double> seconds;
    std::map<std::string, Timestamp> open_launch;
    std::size_t clamped = 0;
    Timestamp lo = 0, hi = 0;
    for (const auto& e : events) {
        if (e.user_id != user_id) continue;
        if (lo == 0 || e.timestamp < lo) lo = e.timestamp;
        hi = std::max(hi, e.timestamp);
        if (e.kind == EventKind::launch) {
            open_launch[e.app_id] = e.timestamp;
        } else if (e.kind == EventKind::close) {
            auto it = open_launch.find(e.app_id);
            if (it == open_launch.end()) continue;
            const Timestamp begin = it->second;
            open_launch.erase(it);
            if (e.timestamp < begin) {
                ++clamped;
                continue;
            }
            // whole duration attributed to the launch's bin
            if (time_bin(begin, tz_offset_seconds).index == bin_index) {
                seconds[e.app_id] += static_cast<double>(e.timestamp - begin);
            }
        }
    }
    return normalize_seconds(std::move(seconds), user_id, lo, hi, clamped);
}

}  // namespace apprank::context
