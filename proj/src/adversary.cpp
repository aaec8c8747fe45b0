#include <lifefin/adversary.hpp>

#include <stdexcept>

namespace lifefin {

const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::honest: return "honest";
        case StrategyKind::crash: return "crash";
        case StrategyKind::inflation: return "inflation";
        case StrategyKind::inflation_ddos: return "inflation+ddos";
        case StrategyKind::equivocator: return "equivocator";
        case StrategyKind::phantom_post: return "phantom-post";
    }
    return "?";
}

std::optional<StrategyKind> parse_strategy(const std::string& s) {
    if (s == "honest") return StrategyKind::honest;
    if (s == "crash") return StrategyKind::crash;
    if (s == "inflation") return StrategyKind::inflation;
    if (s == "inflation+ddos" || s == "inflation_ddos") return StrategyKind::inflation_ddos;
    if (s == "equivocator") return StrategyKind::equivocator;
    if (s == "phantom-post" || s == "phantom_post") return StrategyKind::phantom_post;
    return std::nullopt;
}

std::vector<NodeId> default_byzantine(std::uint32_t n, std::uint32_t f) {
    std::vector<NodeId> out;
    for (std::uint32_t k = 0; k < f && 1 + 3 * k < n; ++k) out.push_back(1 + 3 * k);
    return out;
}

NodeId default_ddos_target(std::uint32_t n, const std::vector<NodeId>& byzantine) {
    for (NodeId id = n; id-- > 0;) {
        bool bad = false;
        for (NodeId b : byzantine) bad |= (b == id);
        if (!bad) return id;
    }
    return 0;
}

Strategy::Strategy(AdversaryConfig cfg, std::uint32_t n, std::uint32_t f)
    : cfg_(std::move(cfg)), n_(n), f_(f) {
    if (cfg_.kind == StrategyKind::honest) {
        cfg_.byzantine.clear();
    } else if (cfg_.byzantine.empty()) {
        cfg_.byzantine = default_byzantine(n, f);
    }
    if (cfg_.kind == StrategyKind::crash) {
        std::uint32_t k = cfg_.crash_count == 0 ? f : cfg_.crash_count;
        if (k > cfg_.byzantine.size()) throw std::invalid_argument("crash_count exceeds f");
        cfg_.byzantine.resize(k);
    }
    if (cfg_.byzantine.size() > f) throw std::invalid_argument("more than f Byzantine nodes");
    for (NodeId b : cfg_.byzantine) {
        if (b >= n) throw std::invalid_argument("Byzantine id out of range");
        if (!byz_.insert(b).second) throw std::invalid_argument("duplicate Byzantine id");
    }
    const bool wants_ddos =
        cfg_.kind == StrategyKind::inflation_ddos || cfg_.kind == StrategyKind::phantom_post;
    if (wants_ddos && !cfg_.ddos_target) cfg_.ddos_target = default_ddos_target(n, cfg_.byzantine);
    if (!wants_ddos) cfg_.ddos_target.reset();
    if (cfg_.ddos_target) {
        if (*cfg_.ddos_target >= n) throw std::invalid_argument("ddos target out of range");
        if (byzantine(*cfg_.ddos_target))
            throw std::invalid_argument("ddos target must be a correct node");
        if (cfg_.ddos_until <= cfg_.ddos_from) throw std::invalid_argument("empty ddos window");
    }
}

bool Strategy::inflating(NodeId id, SimTime t) const {
    const bool kind_ok = cfg_.kind == StrategyKind::inflation ||
                         cfg_.kind == StrategyKind::inflation_ddos ||
                         cfg_.kind == StrategyKind::phantom_post;
    return kind_ok && t >= cfg_.attack_start && byzantine(id);
}

bool Strategy::equivocates(NodeId id, SimTime t) const {
    return cfg_.kind == StrategyKind::equivocator && t >= cfg_.attack_start && byzantine(id);
}

bool Strategy::phantom_posts(NodeId id, SimTime t) const {
    return cfg_.kind == StrategyKind::phantom_post && t >= cfg_.attack_start && byzantine(id);
}

void Strategy::install(SimNet& net) const {
    if (cfg_.kind == StrategyKind::crash)
        for (NodeId b : byz_) net.crash(b, cfg_.crash_at);
    if (cfg_.ddos_target) {
        SimTime until = cfg_.ddos_release_after_trigger > 0 ? kNever : cfg_.ddos_until;
        net.add_ddos(DdosWindow{*cfg_.ddos_target, cfg_.ddos_from, until});
    }
}

void Strategy::on_fallback_trigger(SimNet& net, SimTime t) {
    if (released_ || !cfg_.ddos_target || cfg_.ddos_release_after_trigger <= 0) return;
    released_ = true;
    SimTime at = t + cfg_.ddos_release_after_trigger;
    if (cfg_.ddos_until != kNever) at = std::min(at, cfg_.ddos_until);
    net.release_ddos(*cfg_.ddos_target, at);
}

}  // namespace lifefin
