#include "apprank/types.hpp"

namespace apprank {

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::launch: return "launch";
        case EventKind::interact: return "interact";
        case EventKind::close: return "close";
        case EventKind::install: return "install";
        case EventKind::uninstall: return "uninstall";
    }
    return "unknown";
}

EventKind event_kind_from_string(const std::string& s) {
    if (s == "launch") return EventKind::launch;
    if (s == "interact") return EventKind::interact;
    if (s == "close") return EventKind::close;
    if (s == "install") return EventKind::install;
    if (s == "uninstall") return EventKind::uninstall;
    throw std::invalid_argument("unknown event kind: " + s);
}

std::size_t rank_of(const RankedPrediction& pred, const std::string& app_id) {
    for (std::size_t i = 0; i < pred.items.size(); ++i) {
        if (pred.items[i].app_id == app_id) return i + 1;
    }
    return 0;
}

}  // namespace apprank
