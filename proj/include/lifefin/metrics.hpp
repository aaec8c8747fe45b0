#pragma once

#include <lifefin/bytes.hpp>

#include <vector>

namespace lifefin {

enum class MetricKind : std::uint8_t {
    vertex_proposed,     // a: bytes accepted into the node's store
    vertex_committed,    // a: bytes ordered
    vertex_created,      // a: round, b: bytes
    leader_committed,    // a: round, b: CommitKind, c: creator
    fallback_triggered,  // a: TriggerReason, b: uncommitted bytes
    acs_decided,         // a: view, b: |V|, c: fallback bytes used
    fallback_leader,     // a: round, b: creator, c: 1 if reassigned
    exhausted,
};
const char* to_string(MetricKind k);

struct MetricEvent {
    SimTime time = 0;
    NodeId node = 0;
    MetricKind kind = MetricKind::vertex_proposed;
    std::uint64_t a = 0, b = 0, c = 0;
};

class MetricsLog {
public:
    void emit(SimTime t, NodeId node, MetricKind k, std::uint64_t a = 0, std::uint64_t b = 0,
              std::uint64_t c = 0) {
        events_.push_back(MetricEvent{t, node, k, a, b, c});
    }
    const std::vector<MetricEvent>& events() const { return events_; }

private:
    std::vector<MetricEvent> events_;
};

}  // namespace lifefin
