#include <lifefin/harness.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace lifefin {

// ---------------------------------------------------------------------------
// Config

void validate(const ScenarioConfig& c) {
    if (c.f == 0) throw ConfigError("f", "must be at least 1");
    if (c.n != 3 * c.f + 1) throw ConfigError("n", "must equal 3f+1");
    if (c.delta <= 0) throw ConfigError("delta", "must be positive");
    if (c.gst < 0) throw ConfigError("gst", "must be non-negative");
    if (c.duration <= c.gst) throw ConfigError("duration", "must exceed gst");
    if (c.tx_size == 0) throw ConfigError("tx_size", "must be positive");
    if (c.max_batch_bytes < c.tx_size) throw ConfigError("max_batch_bytes", "smaller than tx_size");
    if (c.memory_limit == 0) throw ConfigError("memory_limit", "must be positive");
    if (c.fallback.uncommitted_limit == 0)
        throw ConfigError("fallback.uncommitted_limit", "must be positive");
    if (c.fallback.stuck_timeout <= 0) throw ConfigError("fallback.stuck_timeout", "must be positive");
    if (c.leader_timeout < 0) throw ConfigError("leader_timeout", "must be non-negative");
    if (c.fallback.enabled && effective_reserve(c) >= c.memory_limit)
        throw ConfigError("memory_limit", "leaves no room above the fallback reserve");
    if (c.fallback.enabled && c.fallback.uncommitted_limit >= c.memory_limit - effective_reserve(c))
        throw ConfigError("fallback.uncommitted_limit", "must stay below memory_limit minus the reserve");
    try {
        Strategy probe(c.adversary, c.n, c.f);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("adversary", e.what());
    }
}

std::size_t effective_reserve(const ScenarioConfig& c) {
    if (c.fallback_reserve) return c.fallback_reserve;
    // Room for a few PoST blocks per node plus the ACS traffic around them.
    const std::size_t post = c.max_batch_bytes + 64 * c.n + (16u << 10);
    return 4 * c.n * post;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
}

template <class T>
T to_number(const std::string& field, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos, 0);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        if (x < 0 && !std::is_signed_v<T>) throw std::invalid_argument("negative");
        return static_cast<T>(x);
    } catch (const std::exception&) {
        throw ConfigError(field, "expected an integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& field, const std::string& v) {
    const auto s = lower(v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(field, "expected a boolean, got '" + v + "'");
}

void apply(ScenarioConfig& c, const std::string& key, const std::vector<std::string>& vals) {
    auto one = [&]() -> const std::string& {
        if (vals.size() != 1) throw ConfigError(key, "expected a single value");
        return vals.front();
    };
    auto num = [&]<class T>(T& out) { out = to_number<T>(key, one()); };

    if (key == "scenario.engine") {
        auto e = parse_engine(lower(one()));
        if (!e) throw ConfigError(key, "unknown engine '" + one() + "'");
        c.engine = *e;
    } else if (key == "scenario.n") num(c.n);
    else if (key == "scenario.f") num(c.f);
    else if (key == "scenario.delta") num(c.delta);
    else if (key == "scenario.gst") num(c.gst);
    else if (key == "scenario.duration") num(c.duration);
    else if (key == "scenario.seed") num(c.seed);
    else if (key == "scenario.keep_trace") c.keep_trace = to_bool(key, one());
    else if (key == "workload.tx_rate") num(c.tx_rate);
    else if (key == "workload.tx_size") num(c.tx_size);
    else if (key == "workload.max_batch_bytes") num(c.max_batch_bytes);
    else if (key == "memory.limit") num(c.memory_limit);
    else if (key == "memory.reserve") num(c.fallback_reserve);
    else if (key == "fallback.enabled") c.fallback.enabled = to_bool(key, one());
    else if (key == "fallback.uncommitted_limit") num(c.fallback.uncommitted_limit);
    else if (key == "fallback.stuck_timeout") num(c.fallback.stuck_timeout);
    else if (key == "engine.leader_timeout") num(c.leader_timeout);
    else if (key == "adversary.strategy") {
        auto k = parse_strategy(lower(one()));
        if (!k) throw ConfigError(key, "unknown strategy '" + one() + "'");
        c.adversary.kind = *k;
    } else if (key == "adversary.byzantine") {
        c.adversary.byzantine.clear();
        for (const auto& v : vals) {
            std::stringstream ss(v);
            std::string part;
            while (std::getline(ss, part, ','))
                if (!part.empty()) c.adversary.byzantine.push_back(to_number<NodeId>(key, part));
        }
    } else if (key == "adversary.crash_count") num(c.adversary.crash_count);
    else if (key == "adversary.crash_at") num(c.adversary.crash_at);
    else if (key == "adversary.attack_start") num(c.adversary.attack_start);
    else if (key == "adversary.ddos_target") c.adversary.ddos_target = to_number<NodeId>(key, one());
    else if (key == "adversary.ddos_from") num(c.adversary.ddos_from);
    else if (key == "adversary.ddos_until") num(c.adversary.ddos_until);
    else if (key == "adversary.ddos_release_after_trigger") num(c.adversary.ddos_release_after_trigger);
    else throw ConfigError(key, "unknown key");
}

}  // namespace

ScenarioConfig parse_config(std::istream& in, ScenarioConfig base) {
    CLI::ConfigINI ini;
    std::vector<CLI::ConfigItem> items;
    try {
        items = ini.from_config(in);
    } catch (const CLI::Error& e) {
        throw ConfigError("config", e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        std::string key;
        for (const auto& p : item.parents) key += p + ".";
        key += item.name;
        apply(base, key, item.inputs);
    }
    return base;
}

ScenarioConfig load_config(const std::string& path, ScenarioConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    return parse_config(in, std::move(base));
}

// ---------------------------------------------------------------------------
// Metrics helpers

std::vector<MetricsRow> MetricsSeries::node_rows(NodeId node) const {
    std::vector<MetricsRow> out;
    for (const auto& r : rows)
        if (r.node == node) out.push_back(r);
    return out;
}

std::uint64_t MetricsSeries::committed_between(const std::vector<NodeId>& nodes,
                                               std::int64_t from_sec, std::int64_t to_sec) const {
    std::uint64_t sum = 0;
    for (const auto& r : rows)
        if (r.t_sec >= from_sec && r.t_sec < to_sec &&
            std::find(nodes.begin(), nodes.end(), r.node) != nodes.end())
            sum += r.committed_bps;
    return sum;
}

bool AuditReport::pass() const {
    if (!safety.pass) return false;
    for (const auto& i : invariants)
        if (!i.pass) return false;
    return true;
}

SafetyVerdict audit_safety(const std::vector<std::pair<NodeId, std::vector<VertexRef>>>& outputs) {
    SafetyVerdict v;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        for (std::size_t j = i + 1; j < outputs.size(); ++j) {
            const auto& a = outputs[i].second;
            const auto& b = outputs[j].second;
            const std::size_t len = std::min(a.size(), b.size());
            for (std::size_t k = 0; k < len; ++k) {
                if (a[k] == b[k]) continue;
                if (!v.first || k < v.first->index)
                    v.first = Divergence{outputs[i].first, outputs[j].first, k, a[k], b[k]};
                v.pass = false;
                break;
            }
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Scenario

Scenario::Scenario(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    NetConfig nc;
    nc.delta = cfg_.delta;
    nc.gst = cfg_.gst;
    nc.seed = cfg_.seed;
    nc.keep_trace_lines = cfg_.keep_trace;
    net_ = std::make_unique<SimNet>(cfg_.n, nc, cfg_.memory_limit, effective_reserve(cfg_));
    keys_ = std::make_unique<KeyRing>(cfg_.seed, cfg_.n);
    strategy_ = std::make_unique<Strategy>(cfg_.adversary, cfg_.n, cfg_.f);

    NodeConfig ncfg;
    ncfg.n = cfg_.n;
    ncfg.f = cfg_.f;
    ncfg.delta = cfg_.delta;
    ncfg.leader_timeout = cfg_.leader_timeout;
    ncfg.max_batch_bytes = cfg_.max_batch_bytes;
    ncfg.tx_rate = cfg_.tx_rate;
    ncfg.tx_size = cfg_.tx_size;
    ncfg.seed = cfg_.seed;
    ncfg.fallback = cfg_.fallback;
    for (NodeId i = 0; i < cfg_.n; ++i) {
        if (cfg_.engine == EngineKind::certified)
            nodes_.push_back(std::make_unique<SailfishNode>(i, ncfg, *net_, *keys_, *strategy_, log_));
        else
            nodes_.push_back(std::make_unique<MysticetiNode>(i, ncfg, *net_, *keys_, *strategy_, log_));
        net_->attach(i, nodes_.back().get());
    }
    strategy_->install(*net_);
    for (auto& node : nodes_) node->start();
    ub_samples_.assign(cfg_.n, {});
}

Scenario::~Scenario() = default;

void Scenario::run_until(SimTime t) { net_->run_until(t); }

void Scenario::run() {
    const std::int64_t seconds = (cfg_.duration + 999) / 1000;
    for (std::int64_t s = static_cast<std::int64_t>(ub_samples_[0].size()); s < seconds; ++s) {
        net_->run_until(std::min<SimTime>((s + 1) * 1000, cfg_.duration) - 1);
        for (NodeId i = 0; i < cfg_.n; ++i)
            ub_samples_[i].push_back(nodes_[i]->store().uncommitted_bytes());
    }
}

const SailfishNode* Scenario::sailfish(NodeId id) const {
    return dynamic_cast<const SailfishNode*>(nodes_.at(id).get());
}

const MysticetiNode* Scenario::mysticeti(NodeId id) const {
    return dynamic_cast<const MysticetiNode*>(nodes_.at(id).get());
}

std::vector<NodeId> Scenario::correct_nodes() const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < cfg_.n; ++i)
        if (strategy_->correct(i)) out.push_back(i);
    return out;
}

Digest Scenario::trace_hash() {
    if (!hash_) hash_ = net_->trace_hash();
    return *hash_;
}

MetricsSeries Scenario::metrics() const {
    MetricsSeries m;
    const std::int64_t seconds = (cfg_.duration + 999) / 1000;
    std::vector<std::vector<std::uint64_t>> prop(cfg_.n, std::vector<std::uint64_t>(seconds)),
        comm(cfg_.n, std::vector<std::uint64_t>(seconds));
    for (const auto& e : log_.events()) {
        const std::int64_t b = e.time / 1000;
        if (b < 0 || b >= seconds) continue;
        if (e.kind == MetricKind::vertex_proposed) prop[e.node][b] += e.a;
        if (e.kind == MetricKind::vertex_committed) comm[e.node][b] += e.a;
    }
    std::vector<std::int64_t> ub(cfg_.n, 0);
    for (std::int64_t t = 0; t < seconds; ++t) {
        for (NodeId i = 0; i < cfg_.n; ++i) {
            ub[i] += static_cast<std::int64_t>(prop[i][t]) - static_cast<std::int64_t>(comm[i][t]);
            bool active = false;
            for (const auto& r : nodes_[i]->fallbacks()) {
                if (!r.trigger_time) continue;
                const SimTime end = r.finalize_time < 0 ? kNever : r.finalize_time;
                if (*r.trigger_time < (t + 1) * 1000 && end >= t * 1000) active = true;
            }
            m.rows.push_back(MetricsRow{t, i, comm[i][t], prop[i][t],
                                        static_cast<std::uint64_t>(std::max<std::int64_t>(0, ub[i])),
                                        active});
        }
    }

    std::map<Digest, SimTime> born;
    for (const auto& node : nodes_)
        for (const auto& c : node->created()) born.emplace(c.ref.digest, c.time);
    for (const auto& node : nodes_) {
        for (const auto& c : node->commits()) {
            auto it = born.find(c.digest);
            if (it != born.end()) m.latencies.push_back({node->id(), c.round, c.time - it->second});
        }
        for (const auto& r : node->fallbacks())
            m.fallbacks.push_back({node->id(), r.view, r.trigger_time.value_or(-1), r.decide_time,
                                   r.finalize_time});
    }
    return m;
}

// ---------------------------------------------------------------------------
// Invariants

namespace {

InvariantResult fail(InvariantResult r, std::string detail) {
    r.pass = false;
    if (r.detail.empty()) r.detail = std::move(detail);
    return r;
}

Round decided_top(const FallbackRecord& r) {
    Round top = 0;
    for (const auto& v : r.decided) top = std::max(top, v.round);
    return top;
}

}  // namespace

InvariantResult check_metrics_conservation(const Scenario& s, const MetricsSeries& m) {
    InvariantResult r{"metrics_conservation", true, ""};
    const auto& samples = s.ub_samples();
    for (const auto& row : m.rows) {
        const auto& col = samples[row.node];
        if (static_cast<std::size_t>(row.t_sec) >= col.size()) continue;
        if (col[row.t_sec] != row.cumulative_ub)
            return fail(r, "node " + std::to_string(row.node) + " t=" + std::to_string(row.t_sec) +
                               " ub " + std::to_string(row.cumulative_ub) + " vs store " +
                               std::to_string(col[row.t_sec]));
    }
    return r;
}

InvariantResult check_certified_no_equivocation(const Scenario& s) {
    InvariantResult r{"certified_no_equivocation", true, ""};
    if (s.config().engine != EngineKind::certified) return r;
    std::map<std::pair<Round, NodeId>, Digest> seen;
    for (NodeId id : s.correct_nodes()) {
        const auto& store = s.node(id).store();
        if (!store.equivocators().empty())
            return fail(r, "node " + std::to_string(id) + " stored an equivocation");
        for (Round rd = 1; rd <= store.max_round(); ++rd) {
            for (const auto& v : store.by_round(rd)) {
                auto [it, fresh] = seen.emplace(std::make_pair(rd, v->creator()), v->digest());
                if (!fresh && it->second != v->digest())
                    return fail(r, "round " + std::to_string(rd) + " creator " +
                                       std::to_string(v->creator()) + " differs across nodes");
            }
        }
    }
    return r;
}

InvariantResult check_round_above_bound(const Scenario& s) {
    InvariantResult r{"round_above_decided_bound", true, ""};
    for (NodeId id : s.correct_nodes())
        for (const auto& rec : s.node(id).fallbacks())
            if (rec.decide_time >= 0 && rec.above_at_decide > 2 * s.config().f)
                return fail(r, "node " + std::to_string(id) + " view " + std::to_string(rec.view) +
                                   " holds " + std::to_string(rec.above_at_decide));
    return r;
}

InvariantResult check_no_early_leader_commit(const Scenario& s) {
    InvariantResult r{"no_early_leader_commit", true, ""};
    for (NodeId id : s.correct_nodes()) {
        const auto& node = s.node(id);
        for (const auto& rec : node.fallbacks()) {
            if (rec.decide_time < 0) continue;
            const Round top = decided_top(rec);
            for (const auto& c : node.commits())
                if (c.round == top && c.time < rec.decide_time)
                    return fail(r, "node " + std::to_string(id) + " committed round " +
                                       std::to_string(top) + " before deciding");
        }
    }
    return r;
}

InvariantResult check_graceful_transition(const Scenario& s) {
    InvariantResult r{"graceful_transition", true, ""};
    for (NodeId id : s.correct_nodes()) {
        const auto& node = s.node(id);
        for (const auto& rec : node.fallbacks()) {
            if (rec.decide_time < 0) continue;
            const Round top = decided_top(rec);
            for (const auto& c : node.created())
                if (c.ref.round == top + 1 && c.time >= rec.decide_time)
                    return fail(r, "node " + std::to_string(id) + " created round " +
                                       std::to_string(top + 1));
        }
    }
    return r;
}

InvariantResult check_acs(const Scenario& s) {
    InvariantResult r{"acs_agreement_validity_termination", true, ""};
    const auto& cfg = s.config();
    std::map<std::uint64_t, std::pair<NodeId, std::vector<VertexRef>>> first;
    std::map<std::uint64_t, SimTime> earliest;
    for (NodeId id : s.correct_nodes()) {
        for (const auto& rec : s.node(id).fallbacks()) {
            if (rec.decide_time < 0) continue;
            if (rec.decided.size() < cfg.n - cfg.f)
                return fail(r, "view " + std::to_string(rec.view) + " decided " +
                                   std::to_string(rec.decided.size()) + " blocks");
            std::set<NodeId> creators;
            for (const auto& v : rec.decided) creators.insert(v.creator);
            if (creators.size() != rec.decided.size())
                return fail(r, "view " + std::to_string(rec.view) + " repeats a creator");
            auto [it, fresh] = first.emplace(rec.view, std::make_pair(id, rec.decided));
            if (!fresh && it->second.second != rec.decided)
                return fail(r, "view " + std::to_string(rec.view) + " nodes " +
                                   std::to_string(it->second.first) + " and " + std::to_string(id) +
                                   " disagree");
            auto [e, _] = earliest.emplace(rec.view, rec.decide_time);
            e->second = std::min(e->second, rec.decide_time);
        }
        for (const auto& rec : s.node(id).fallbacks()) {
            const auto* inst = s.node(id).acs(rec.view);
            if (inst && inst->max_aba_rounds() > 64)
                return fail(r, "view " + std::to_string(rec.view) + " needed " +
                                   std::to_string(inst->max_aba_rounds()) + " agreement rounds");
        }
    }
    // Termination: once some correct node decides, every live correct node follows
    // within a generous window, provided the run lasts that long.
    const SimTime grace = cfg.fallback.stuck_timeout + 200 * cfg.delta;
    for (const auto& [view, t] : earliest) {
        if (t + grace >= cfg.duration) continue;
        if (cfg.adversary.ddos_target && s.net().suppressed(*cfg.adversary.ddos_target, cfg.duration - 1))
            continue;
        for (NodeId id : s.correct_nodes()) {
            if (s.net().crashed(id)) continue;
            const auto& node = s.node(id);
            if (node.fallback_view() > view) continue;
            bool got = false;
            for (const auto& rec : node.fallbacks()) got |= rec.view == view && rec.decide_time >= 0;
            if (!got)
                return fail(r, "node " + std::to_string(id) + " never decided view " +
                                   std::to_string(view));
        }
    }
    return r;
}

InvariantResult check_data_availability(const Scenario& s) {
    InvariantResult r{"ordered_history_complete", true, ""};
    for (NodeId id : s.correct_nodes()) {
        const auto& node = s.node(id);
        if (node.audit().ordered_without_history)
            return fail(r, "node " + std::to_string(id) + " skipped " +
                               std::to_string(node.audit().ordered_without_history) +
                               " leaders with missing history");
        // Every ordered vertex's parents were ordered no later than it.
        std::set<Digest> done;
        for (const auto& v : node.ordered()) {
            for (const auto& ref : v->refs())
                if (!done.count(ref.digest))
                    return fail(r, "node " + std::to_string(id) + " ordered a vertex before its parent");
            done.insert(v->digest());
        }
    }
    return r;
}

AuditReport Scenario::audit() const {
    AuditReport rep;
    std::vector<std::pair<NodeId, std::vector<VertexRef>>> outs;
    for (NodeId id : correct_nodes()) {
        std::vector<VertexRef> seq;
        for (const auto& v : nodes_[id]->ordered()) seq.push_back(v->ref());
        outs.emplace_back(id, std::move(seq));
    }
    rep.safety = audit_safety(outs);

    const auto m = metrics();
    const auto correct = correct_nodes();
    const std::int64_t seconds = (cfg_.duration + 999) / 1000;
    for (std::int64_t from = 5; from + 5 <= seconds; from += 5) {
        WindowVerdict w{from, from + 5, m.committed_between(correct, from, from + 5), false};
        w.pass = w.committed > 0;
        rep.liveness.push_back(w);
    }

    rep.invariants.push_back(check_metrics_conservation(*this, m));
    rep.invariants.push_back(check_certified_no_equivocation(*this));
    rep.invariants.push_back(check_round_above_bound(*this));
    rep.invariants.push_back(check_no_early_leader_commit(*this));
    rep.invariants.push_back(check_graceful_transition(*this));
    rep.invariants.push_back(check_acs(*this));
    rep.invariants.push_back(check_data_availability(*this));
    return rep;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    Scenario s(cfg);
    s.run();
    ScenarioResult out;
    out.metrics = s.metrics();
    out.audit = s.audit();
    out.trace_hash = s.trace_hash();
    return out;
}

// ---------------------------------------------------------------------------
// Export

void write_csv(const MetricsSeries& m, std::ostream& out) {
    out << "t_sec,node,committed_bps,proposed_bps,cumulative_ub,fallback_active\n";
    for (const auto& r : m.rows)
        out << r.t_sec << ',' << r.node << ',' << r.committed_bps << ',' << r.proposed_bps << ','
            << r.cumulative_ub << ',' << (r.fallback_active ? 1 : 0) << '\n';
}

void write_json(const MetricsSeries& m, std::ostream& out) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : m.rows) {
        nlohmann::ordered_json j;
        j["t_sec"] = r.t_sec;
        j["node"] = r.node;
        j["committed_bps"] = r.committed_bps;
        j["proposed_bps"] = r.proposed_bps;
        j["cumulative_ub"] = r.cumulative_ub;
        j["fallback_active"] = r.fallback_active;
        rows.push_back(std::move(j));
    }
    nlohmann::ordered_json doc;
    doc["rows"] = std::move(rows);
    out << doc.dump(1) << '\n';
}

std::vector<MetricsRow> read_csv(std::istream& in) {
    std::vector<MetricsRow> out;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw std::runtime_error("bad csv row: " + line);
        MetricsRow r;
        r.t_sec = std::stoll(cells[0]);
        r.node = static_cast<NodeId>(std::stoul(cells[1]));
        r.committed_bps = std::stoull(cells[2]);
        r.proposed_bps = std::stoull(cells[3]);
        r.cumulative_ub = std::stoull(cells[4]);
        r.fallback_active = cells[5] == "1";
        out.push_back(r);
    }
    return out;
}

std::vector<MetricsRow> read_json(std::istream& in) {
    auto doc = nlohmann::json::parse(in);
    std::vector<MetricsRow> out;
    for (const auto& j : doc.at("rows")) {
        MetricsRow r;
        r.t_sec = j.at("t_sec").get<std::int64_t>();
        r.node = j.at("node").get<NodeId>();
        r.committed_bps = j.at("committed_bps").get<std::uint64_t>();
        r.proposed_bps = j.at("proposed_bps").get<std::uint64_t>();
        r.cumulative_ub = j.at("cumulative_ub").get<std::uint64_t>();
        r.fallback_active = j.at("fallback_active").get<bool>();
        out.push_back(r);
    }
    return out;
}

void export_metrics(const MetricsSeries& m, const std::string& format, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    if (format == "csv")
        write_csv(m, out);
    else if (format == "json")
        write_json(m, out);
    else
        throw std::invalid_argument("unknown format '" + format + "'");
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace lifefin
