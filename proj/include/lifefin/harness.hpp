#pragma once

#include <lifefin/mysticeti.hpp>
#include <lifefin/sailfish.hpp>

#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace lifefin {

struct ScenarioConfig {
    EngineKind engine = EngineKind::certified;
    std::uint32_t n = 4;
    std::uint32_t f = 1;
    SimTime delta = 100;
    SimTime gst = 0;
    std::uint64_t tx_rate = 1000;
    std::size_t tx_size = 512;
    std::size_t max_batch_bytes = 64u << 10;
    std::size_t memory_limit = 16u << 20;
    std::size_t fallback_reserve = 0;  // 0: sized from n
    FallbackConfig fallback;
    SimTime leader_timeout = 0;  // 0: engine default
    AdversaryConfig adversary;
    SimTime duration = 60000;
    std::uint64_t seed = 1;
    bool keep_trace = false;
};

struct ConfigError : std::invalid_argument {
    std::string field;
    ConfigError(std::string fld, const std::string& what)
        : std::invalid_argument(fld + ": " + what), field(std::move(fld)) {}
};

// Throws ConfigError naming the first bad field.
void validate(const ScenarioConfig& cfg);
std::size_t effective_reserve(const ScenarioConfig& cfg);

// Sectioned key = value text ([scenario], [workload], [memory], [fallback],
// [adversary], [engine]). Unknown keys are errors.
ScenarioConfig parse_config(std::istream& in, ScenarioConfig base = {});
ScenarioConfig load_config(const std::string& path, ScenarioConfig base = {});

struct MetricsRow {
    std::int64_t t_sec = 0;
    NodeId node = 0;
    std::uint64_t committed_bps = 0;
    std::uint64_t proposed_bps = 0;
    std::uint64_t cumulative_ub = 0;
    bool fallback_active = false;
    bool operator==(const MetricsRow&) const = default;
};

struct LeaderLatency {
    NodeId node = 0;
    Round round = 0;
    SimTime latency = 0;  // commit time minus the leader vertex's creation time
};

struct FallbackMarker {
    NodeId node = 0;
    std::uint64_t view = 0;
    SimTime trigger = -1;
    SimTime decide = -1;
    SimTime finalize = -1;
};

struct MetricsSeries {
    std::vector<MetricsRow> rows;  // t_sec ascending, then node
    std::vector<LeaderLatency> latencies;
    std::vector<FallbackMarker> fallbacks;

    std::vector<MetricsRow> node_rows(NodeId node) const;
    // Sum over `nodes` of committed bytes in [from_sec, to_sec).
    std::uint64_t committed_between(const std::vector<NodeId>& nodes, std::int64_t from_sec,
                                    std::int64_t to_sec) const;
};

struct Divergence {
    NodeId a = 0, b = 0;
    std::size_t index = 0;
    VertexRef va, vb;
};

struct SafetyVerdict {
    bool pass = true;
    std::optional<Divergence> first;
};

struct WindowVerdict {
    std::int64_t from_sec = 0, to_sec = 0;
    std::uint64_t committed = 0;
    bool pass = false;
};

struct InvariantResult {
    std::string name;
    bool pass = true;
    std::string detail;
};

struct AuditReport {
    SafetyVerdict safety;
    std::vector<WindowVerdict> liveness;  // informational; not part of pass()
    std::vector<InvariantResult> invariants;
    bool pass() const;
};

// Prefix consistency over the given ordered outputs.
SafetyVerdict audit_safety(const std::vector<std::pair<NodeId, std::vector<VertexRef>>>& outputs);

// One simulation with every node, kept alive so tests can inspect state.
class Scenario {
public:
    explicit Scenario(ScenarioConfig cfg);  // throws ConfigError
    ~Scenario();
    Scenario(const Scenario&) = delete;
    Scenario& operator=(const Scenario&) = delete;

    // Runs to the configured duration, sampling each second.
    void run();
    // Runs until `t` (inclusive) without sampling; for tests that poke mid-run.
    void run_until(SimTime t);

    const ScenarioConfig& config() const { return cfg_; }
    SimNet& net() { return *net_; }
    const SimNet& net() const { return *net_; }
    const Strategy& strategy() const { return *strategy_; }
    const MetricsLog& log() const { return log_; }
    const Node& node(NodeId id) const { return *nodes_.at(id); }
    const SailfishNode* sailfish(NodeId id) const;
    const MysticetiNode* mysticeti(NodeId id) const;
    std::vector<NodeId> correct_nodes() const;
    // Per node, per second: store-reported uncommitted bytes at the end of the second.
    const std::vector<std::vector<std::uint64_t>>& ub_samples() const { return ub_samples_; }

    MetricsSeries metrics() const;
    AuditReport audit() const;
    Digest trace_hash();  // call once, after run()

private:
    ScenarioConfig cfg_;
    std::unique_ptr<SimNet> net_;
    std::unique_ptr<KeyRing> keys_;
    std::unique_ptr<Strategy> strategy_;
    MetricsLog log_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<std::vector<std::uint64_t>> ub_samples_;
    std::optional<Digest> hash_;
};

struct ScenarioResult {
    MetricsSeries metrics;
    AuditReport audit;
    Digest trace_hash{};
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

// Individual invariant checks, also folded into Scenario::audit().
InvariantResult check_metrics_conservation(const Scenario& s, const MetricsSeries& m);
InvariantResult check_certified_no_equivocation(const Scenario& s);
InvariantResult check_round_above_bound(const Scenario& s);
InvariantResult check_no_early_leader_commit(const Scenario& s);
InvariantResult check_graceful_transition(const Scenario& s);
InvariantResult check_acs(const Scenario& s);
InvariantResult check_data_availability(const Scenario& s);

void write_csv(const MetricsSeries& m, std::ostream& out);
void write_json(const MetricsSeries& m, std::ostream& out);
std::vector<MetricsRow> read_csv(std::istream& in);
std::vector<MetricsRow> read_json(std::istream& in);
// Throws std::runtime_error when the path cannot be written.
void export_metrics(const MetricsSeries& m, const std::string& format, const std::string& path);

}  // namespace lifefin
