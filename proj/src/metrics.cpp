#include <lifefin/metrics.hpp>

namespace lifefin {

const char* to_string(MetricKind k) {
    switch (k) {
        case MetricKind::vertex_proposed: return "vertex_proposed";
        case MetricKind::vertex_committed: return "vertex_committed";
        case MetricKind::vertex_created: return "vertex_created";
        case MetricKind::leader_committed: return "leader_committed";
        case MetricKind::fallback_triggered: return "fallback_triggered";
        case MetricKind::acs_decided: return "acs_decided";
        case MetricKind::fallback_leader: return "fallback_leader";
        case MetricKind::exhausted: return "exhausted";
    }
    return "?";
}

}  // namespace lifefin
