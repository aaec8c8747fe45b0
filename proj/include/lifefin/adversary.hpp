#pragma once

#include <lifefin/simnet.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lifefin {

enum class StrategyKind { honest, crash, inflation, inflation_ddos, equivocator, phantom_post };
const char* to_string(StrategyKind k);
std::optional<StrategyKind> parse_strategy(const std::string& s);

struct AdversaryConfig {
    StrategyKind kind = StrategyKind::honest;
    std::vector<NodeId> byzantine;  // empty: default placement
    std::uint32_t crash_count = 0;  // crash strategy; 0 means f
    SimTime crash_at = 0;
    SimTime attack_start = 0;       // Byzantine behavior switches on here
    std::optional<NodeId> ddos_target;
    SimTime ddos_from = 0;
    SimTime ddos_until = kNever;    // kNever: open until released
    SimTime ddos_release_after_trigger = 0;  // > 0: close the window this long after the first fallback trigger
};

// Default Byzantine placement, spaced so that no two faulty nodes lead
// consecutive rounds: {1, 4, 7, ...}.
std::vector<NodeId> default_byzantine(std::uint32_t n, std::uint32_t f);
// First correct node scanning down from n-1.
NodeId default_ddos_target(std::uint32_t n, const std::vector<NodeId>& byzantine);

// Static adversary. Every hook is a pure function of (node, time).
class Strategy {
public:
    Strategy(AdversaryConfig cfg, std::uint32_t n, std::uint32_t f);  // throws on invalid config

    const AdversaryConfig& config() const { return cfg_; }
    StrategyKind kind() const { return cfg_.kind; }
    bool byzantine(NodeId id) const { return byz_.count(id) != 0; }
    const std::set<NodeId>& byzantine_set() const { return byz_; }
    bool correct(NodeId id) const { return !byzantine(id); }

    bool inflating(NodeId id, SimTime t) const;
    bool exclude_leader_refs(NodeId id, SimTime t) const { return inflating(id, t); }
    bool skip_leader_vertex(NodeId id, SimTime t) const { return inflating(id, t); }
    bool withhold_leader_votes(NodeId id, SimTime t) const { return inflating(id, t); }
    bool withhold_post_signature(NodeId id, SimTime t) const { return inflating(id, t); }
    bool silent_in_acs(NodeId id, SimTime t) const { return inflating(id, t); }
    bool equivocates(NodeId id, SimTime t) const;
    bool phantom_posts(NodeId id, SimTime t) const;

    // Crashes and DDoS windows.
    void install(SimNet& net) const;
    void on_fallback_trigger(SimNet& net, SimTime t);

private:
    AdversaryConfig cfg_;
    std::uint32_t n_, f_;
    std::set<NodeId> byz_;
    bool released_ = false;
};

}  // namespace lifefin
