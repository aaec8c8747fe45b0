// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <atomic>
#include <functional>
#include <thread>
#include <sstream>

using namespace lifefin;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

Verdict fail_with(Verdict v, const std::string& why) {
    if (v.pass) v.detail = why;
    v.pass = false;
    return v;
}

std::string csv_of(const MetricsSeries& m) {
    std::ostringstream out;
    write_csv(m, out);
    return out.str();
}

std::string config_path(const char* name) { return std::string(LIFEFIN_SOURCE_DIR) + "/configs/" + name; }

// Both stress strategies need the DDoS lifted shortly after the first trigger,
// otherwise a small committee has too few active nodes to build the DAG at all.
ScenarioConfig safety_config(EngineKind engine, StrategyKind kind, std::uint32_t n, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.engine = engine;
    cfg.n = n;
    cfg.f = (n - 1) / 3;
    cfg.seed = seed;
    cfg.duration = 20000;
    cfg.leader_timeout = 1000;
    cfg.adversary.kind = kind;
    if (kind == StrategyKind::inflation_ddos || kind == StrategyKind::phantom_post) {
        cfg.adversary.attack_start = 2000;
        cfg.adversary.ddos_from = 2000;
        cfg.adversary.ddos_release_after_trigger = 2000;
        cfg.fallback.uncommitted_limit = n == 4 ? 150000 : 1u << 20;
    }
    return cfg;
}

// Short runs whose backlog limit trips on ordinary in-flight data, so every
// trace goes through several fallback hand-offs.
ScenarioConfig churn_config(EngineKind engine, StrategyKind kind, std::uint32_t n, std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.engine = engine;
    cfg.n = n;
    cfg.f = (n - 1) / 3;
    cfg.seed = seed;
    cfg.duration = 15000;
    cfg.leader_timeout = 1000;
    cfg.adversary.kind = kind;
    cfg.adversary.ddos_release_after_trigger = 2000;
    cfg.fallback.uncommitted_limit = 150000 * (n / 4 + (n % 4 != 0));
    return cfg;
}

const std::vector<StrategyKind> kAllStrategies{StrategyKind::honest,         StrategyKind::crash,
                                               StrategyKind::inflation,      StrategyKind::inflation_ddos,
                                               StrategyKind::equivocator,    StrategyKind::phantom_post};

std::string label(const ScenarioConfig& c) {
    return std::string(to_string(c.engine)) + "/" + to_string(c.adversary.kind) + "/n" + std::to_string(c.n) +
           "/s" + std::to_string(c.seed);
}

struct SafetyRun {
    ScenarioConfig cfg;
    bool safe = false;
    std::vector<std::string> broken;  // failed invariants
    std::size_t replay_checked = 0;
    std::size_t replay_mismatches = 0;
    std::string replay_detail;
    Digest hash{};
    std::string csv;
};

SafetyRun run_safety(const ScenarioConfig& cfg) {
    SafetyRun out;
    out.cfg = cfg;
    Scenario sim(cfg);
    sim.run();
    auto rep = sim.audit();
    out.safe = rep.safety.pass;
    for (auto& inv : rep.invariants)
        if (!inv.pass) out.broken.push_back(inv.name + ": " + inv.detail);
    if (cfg.engine == EngineKind::certified) {
        for (NodeId id : sim.correct_nodes()) {
            auto r = oracle::sailfish_replay(sim.node(id), cfg.adversary.kind != StrategyKind::equivocator);
            ++out.replay_checked;
            if (!r.ok()) {
                ++out.replay_mismatches;
                if (out.replay_detail.empty()) out.replay_detail = "node " + std::to_string(id) + ": " + r.detail;
            }
        }
    }
    out.hash = sim.trace_hash();
    out.csv = csv_of(sim.metrics());
    return out;
}

template <class T, class F>
std::vector<T> parallel_map(const std::vector<ScenarioConfig>& cfgs, F fn) {
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<T> out(cfgs.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, cfgs.size()); ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < cfgs.size();) out[i] = fn(cfgs[i]);
        });
    for (auto& t : pool) t.join();
    return out;
}

// ---------------------------------------------------------------------------

Verdict safety_suite(const std::vector<SafetyRun>& runs) {
    Verdict v;
    std::size_t safe = 0, clean = 0;
    for (auto& r : runs) {
        safe += r.safe;
        clean += r.broken.empty();
        if (!r.safe) v = fail_with(v, label(r.cfg) + " diverged");
        if (!r.broken.empty()) v = fail_with(v, label(r.cfg) + " " + r.broken.front());
    }
    if (runs.size() < 200) v = fail_with(v, "only " + std::to_string(runs.size()) + " scenarios");
    v.detail = std::to_string(safe) + "/" + std::to_string(runs.size()) + " prefix-consistent, " +
               std::to_string(clean) + " with every invariant" + (v.pass ? "" : "; " + v.detail);
    return v;
}

Verdict liveness() {
    Verdict v;
    std::string summary;
    for (auto engine : {EngineKind::certified, EngineKind::uncertified}) {
        ScenarioConfig cfg;
        cfg.engine = engine;
        cfg.n = 4;
        cfg.f = 1;
        cfg.gst = 0;
        cfg.duration = 60000;
        auto res = run_scenario(cfg);
        std::size_t ok = 0;
        for (auto& w : res.audit.liveness) {
            ok += w.pass;
            if (!w.pass)
                v = fail_with(v, std::string(to_string(engine)) + " window " + std::to_string(w.from_sec) + "s empty");
        }
        if (res.audit.liveness.size() != 11) v = fail_with(v, "expected 11 windows");
        summary += std::string(to_string(engine)) + " " + std::to_string(ok) + "/" +
                   std::to_string(res.audit.liveness.size()) + " windows ";
    }
    v.detail = summary + (v.pass ? "" : "; " + v.detail);
    return v;
}

SimTime exhausted_at(const Scenario& sim, NodeId id) {
    for (auto& e : sim.log().events())
        if (e.node == id && e.kind == MetricKind::exhausted) return e.time;
    return -1;
}

Verdict attack_without_fallback() {
    Verdict v;
    Scenario sim(load_config(config_path("inflation_no_fallback.ini")));
    sim.run();
    const auto& cfg = sim.config();
    const NodeId target = *sim.strategy().config().ddos_target;
    const auto m = sim.metrics();
    const std::int64_t start = cfg.adversary.attack_start / 1000;
    std::size_t exhausted = 0;
    std::int64_t last_breach = 0;
    for (NodeId id : sim.correct_nodes()) {
        const auto rows = m.node_rows(id);
        for (auto& r : rows)
            if (r.t_sec >= start + 2 && r.committed_bps > 0)
                v = fail_with(v, "node " + std::to_string(id) + " committed at " + std::to_string(r.t_sec) + "s");
        if (id == target) continue;  // receives nothing while suppressed
        const SimTime ex = exhausted_at(sim, id);
        exhausted += ex >= 0;
        const std::int64_t breach = ex >= 0 ? ex / 1000 : static_cast<std::int64_t>(rows.size()) - 1;
        last_breach = std::max(last_breach, breach);
        for (std::int64_t t = 0; t < breach; ++t)
            if (rows[t].proposed_bps == 0)
                v = fail_with(v, "node " + std::to_string(id) + " proposed nothing at " + std::to_string(t) + "s");
        for (std::int64_t t = start + 1; t <= breach; ++t)
            if (rows[t].cumulative_ub <= rows[t - 1].cumulative_ub)
                v = fail_with(v, "node " + std::to_string(id) + " backlog flat at " + std::to_string(t) + "s");
    }
    if (!exhausted) v = fail_with(v, "no correct node exhausted");
    v.detail = std::to_string(exhausted) + " correct nodes exhausted, last breach at " + std::to_string(last_breach) +
               "s, no commits after " + std::to_string(start + 2) + "s" + (v.pass ? "" : "; " + v.detail);
    return v;
}

Verdict attack_with_fallback() {
    Verdict v;
    Scenario sim(load_config(config_path("inflation_with_fallback.ini")));
    sim.run();
    const auto m = sim.metrics();
    std::size_t one_vertex = 0;
    for (NodeId id = 0; id < sim.config().n; ++id)
        for (auto& c : sim.node(id).created()) one_vertex = std::max(one_vertex, c.bytes);
    std::size_t worst_drift = 0, finalized = 0;
    SimTime first_trigger = kNever, last_decide = 0;
    for (NodeId id : sim.correct_nodes()) {
        const auto& node = sim.node(id);
        if (sim.net().memory().account(id).ever_exhausted) v = fail_with(v, "node " + std::to_string(id) + " exhausted");
        if (node.fallbacks().empty()) {
            v = fail_with(v, "node " + std::to_string(id) + " never entered the fallback");
            continue;
        }
        const auto& rec = node.fallbacks().front();
        if (!rec.trigger_time || rec.decide_time < 0 || rec.finalize_time < 0) {
            v = fail_with(v, "node " + std::to_string(id) + " did not decide and finalize view 1");
            continue;
        }
        ++finalized;
        first_trigger = std::min(first_trigger, *rec.trigger_time);
        last_decide = std::max(last_decide, rec.decide_time);
        auto drift = [&](std::size_t ub) {
            return ub > rec.ub_at_trigger ? ub - rec.ub_at_trigger : rec.ub_at_trigger - ub;
        };
        std::size_t d = drift(rec.ub_at_decide);
        const auto& samples = sim.ub_samples()[id];
        for (std::size_t t = 0; t < samples.size(); ++t) {
            const SimTime end = static_cast<SimTime>(t + 1) * 1000 - 1;  // sampled at the end of second t
            if (end > *rec.trigger_time && end < rec.decide_time) d = std::max(d, drift(samples[t]));
        }
        worst_drift = std::max(worst_drift, d);
        if (d > one_vertex)
            v = fail_with(v, "node " + std::to_string(id) + " backlog moved " + std::to_string(d) + " bytes in the stall");
        const std::int64_t after = rec.finalize_time / 1000 + 1;
        const auto rows = m.node_rows(id);
        std::uint64_t committed_after = 0, lowest_after = UINT64_MAX;
        for (auto& r : rows)
            if (r.t_sec >= after) {
                committed_after += r.committed_bps;
                lowest_after = std::min<std::uint64_t>(lowest_after, r.cumulative_ub);
            }
        if (!committed_after) v = fail_with(v, "node " + std::to_string(id) + " commits nothing after finalize");
        if (lowest_after >= rec.ub_at_trigger)
            v = fail_with(v, "node " + std::to_string(id) + " backlog never dropped below its trigger level");
    }
    std::ostringstream d;
    d << finalized << "/" << sim.correct_nodes().size() << " finalized view 1, first trigger " << first_trigger / 1000.0
      << "s, last decide " << last_decide / 1000.0 << "s, worst stall drift " << worst_drift << "B (one vertex "
      << one_vertex << "B)";
    v.detail = d.str() + (v.pass ? "" : "; " + v.detail);
    return v;
}



struct Footprint {
    std::size_t views = 0;
    std::size_t peak = 0;  // largest first-view footprint over correct nodes
    double mean = 0;
    std::size_t ub_at_trigger = 0;
};

// First fallback view only: its backlog is the one that was configured.
// Committees must have n = 3f+1, so 22 nodes stand in for 20; the
// footprint grows with n, which makes this the stricter case.
Footprint footprint(std::size_t backlog_limit) {
    ScenarioConfig cfg;
    cfg.engine = EngineKind::certified;
    cfg.n = 22;
    cfg.f = 7;
    cfg.seed = 3;
    cfg.tx_rate = 4000;
    cfg.memory_limit = 32u << 20;
    cfg.leader_timeout = 1000;
    cfg.fallback.uncommitted_limit = backlog_limit;
    cfg.adversary.kind = StrategyKind::inflation_ddos;
    // attack from the start so both backlogs build up in the same stalled regime
    cfg.adversary.attack_start = 1000;
    cfg.adversary.ddos_from = 1000;
    cfg.adversary.ddos_release_after_trigger = 5000;
    cfg.duration = 30000;
    Scenario sim(cfg);
    sim.run();
    Footprint fp;
    std::size_t total = 0;
    for (NodeId id : sim.correct_nodes()) {
        const auto& recs = sim.node(id).fallbacks();
        if (recs.empty() || recs.front().finalize_time < 0) continue;
        ++fp.views;
        total += recs.front().fallback_bytes;
        fp.peak = std::max(fp.peak, recs.front().fallback_bytes);
        fp.ub_at_trigger = std::max(fp.ub_at_trigger, recs.front().ub_at_trigger);
    }
    fp.mean = fp.views ? static_cast<double>(total) / fp.views : 0;
    return fp;
}

Verdict fallback_footprint() {
    Verdict v;
    const Footprint small = footprint(1u << 20), large = footprint(10u << 20);
    for (const auto* fp : {&small, &large}) {
        if (fp->views == 0) v = fail_with(v, "a run finished no fallback view");
        if (fp->peak >= 10u << 20) v = fail_with(v, "footprint " + std::to_string(fp->peak) + "B");
    }
    const double ratio = small.mean > 0 && large.mean > 0 ? std::max(small.mean, large.mean) / std::min(small.mean, large.mean) : 0;
    if (!(ratio > 0 && ratio < 1.2)) v = fail_with(v, "ratio out of range");
    std::ostringstream d;
    d.precision(3);
    d << "n=22 first view: backlog " << small.ub_at_trigger << "B -> mean " << small.mean << "B peak " << small.peak
      << "B; backlog " << large.ub_at_trigger << "B -> mean " << large.mean << "B peak " << large.peak << "B; ratio "
      << ratio;
    v.detail = d.str() + (v.pass ? "" : "; " + v.detail);
    return v;
}

struct PropertyRun {
    ScenarioConfig cfg;
    bool decided = false;
    bool ordered = false;
    std::map<std::string, InvariantResult> checks;
};

PropertyRun run_properties(const ScenarioConfig& cfg) {
    PropertyRun out;
    out.cfg = cfg;
    Scenario sim(cfg);
    sim.run();
    for (NodeId id : sim.correct_nodes()) {
        for (auto& rec : sim.node(id).fallbacks()) out.decided |= rec.decide_time >= 0;
        out.ordered |= !sim.node(id).commits().empty();
    }
    for (auto r : {check_certified_no_equivocation(sim), check_round_above_bound(sim), check_no_early_leader_commit(sim),
                   check_graceful_transition(sim), check_acs(sim), check_data_availability(sim)})
        out.checks[r.name] = r;
    return out;
}

Verdict property_suite(const std::vector<PropertyRun>& runs) {
    struct Prop {
        const char* tag;
        const char* check;
        std::function<bool(const PropertyRun&)> applies;
    };
    const std::vector<Prop> props{
        {"a", "certified_no_equivocation", [](auto& r) { return r.cfg.engine == EngineKind::certified && r.ordered; }},
        {"b", "round_above_decided_bound", [](auto& r) { return r.decided; }},
        {"c", "no_early_leader_commit", [](auto& r) { return r.decided; }},
        {"d", "graceful_transition", [](auto& r) { return r.decided; }},
        {"e", "acs_agreement_validity_termination", [](auto& r) { return r.decided; }},
        {"f", "ordered_history_complete", [](auto& r) { return r.cfg.engine == EngineKind::uncertified && r.ordered; }},
    };
    Verdict v;
    std::string summary;
    for (auto& p : props) {
        std::size_t traces = 0, held = 0;
        for (auto& r : runs) {
            if (!p.applies(r)) continue;
            ++traces;
            const auto& res = r.checks.at(p.check);
            held += res.pass;
            if (!res.pass) v = fail_with(v, std::string("(") + p.tag + ") " + label(r.cfg) + ": " + res.detail);
        }
        if (traces < 100) v = fail_with(v, std::string("(") + p.tag + ") only " + std::to_string(traces) + " traces");
        summary += std::string("(") + p.tag + ") " + std::to_string(held) + "/" + std::to_string(traces) + " ";
    }
    v.detail = summary + (v.pass ? "" : "; " + v.detail);
    return v;
}

Verdict oracle_equivalence(const std::vector<SafetyRun>& runs) {
    Verdict v;
    testkit::Rng rng(90210);
    std::size_t dags = 0, mysticeti_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto vs = oracle::oracle_dag(rng);
        DagStore store(4, 1, DagMode::uncertified);
        for (auto& x : vs) store.insert(x);
        const NodeId shift = static_cast<NodeId>(rng.below(4));
        std::string why;
        const auto bad = oracle::compare_mysticeti(
            store, [shift](Round r) { return static_cast<NodeId>((r + shift) % 4); }, &why);
        ++dags;
        mysticeti_bad += bad;
        if (bad) v = fail_with(v, "dag " + std::to_string(trial) + ": " + why);
    }
    std::size_t replays = 0, replay_bad = 0;
    for (auto& r : runs) {
        replays += r.replay_checked;
        replay_bad += r.replay_mismatches;
        if (r.replay_mismatches) v = fail_with(v, label(r.cfg) + " " + r.replay_detail);
    }
    if (replays == 0) v = fail_with(v, "no replay ran");
    v.detail = std::to_string(mysticeti_bad) + " mismatches over " + std::to_string(dags) + " random DAGs, " +
               std::to_string(replay_bad) + " over " + std::to_string(replays) + " replayed node outputs" +
               (v.pass ? "" : "; " + v.detail);
    return v;
}

Verdict determinism(const std::vector<SafetyRun>& first, const std::vector<SafetyRun>& second,
                    const std::vector<std::string>& named) {
    Verdict v;
    std::size_t same = 0;
    for (std::size_t i = 0; i < first.size(); ++i) {
        const bool eq = first[i].hash == second[i].hash && first[i].csv == second[i].csv;
        same += eq;
        if (!eq) v = fail_with(v, label(first[i].cfg) + " differs on re-run");
    }
    for (auto& path : named) {
        auto a = run_scenario(load_config(path)), b = run_scenario(load_config(path));
        const bool eq = a.trace_hash == b.trace_hash && csv_of(a.metrics) == csv_of(b.metrics);
        same += eq;
        if (!eq) v = fail_with(v, path + " differs on re-run");
    }
    v.detail = std::to_string(same) + "/" + std::to_string(first.size() + named.size()) +
               " scenarios identical on re-run" + (v.pass ? "" : "; " + v.detail);
    return v;
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    int failures = 0;
    auto report = [&](int id, const char* name, const Verdict& v) {
        failures += !v.pass;
        std::printf("%s criterion %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
        std::fflush(stdout);
    };

    std::vector<ScenarioConfig> safety_cfgs;
    for (auto engine : {EngineKind::certified, EngineKind::uncertified})
        for (auto kind : kAllStrategies)
            for (std::uint32_t n : {4u, 10u})
                for (std::uint64_t seed = 1; seed <= 9; ++seed) safety_cfgs.push_back(safety_config(engine, kind, n, seed));
    const auto safety = parallel_map<SafetyRun>(safety_cfgs, run_safety);
    report(1, "safety suite", safety_suite(safety));

    report(2, "liveness under synchrony", liveness());
    report(3, "inflation attack without fallback", attack_without_fallback());
    report(4, "inflation attack with fallback", attack_with_fallback());
    report(5, "fallback footprint", fallback_footprint());

    std::vector<ScenarioConfig> prop_cfgs;
    for (auto engine : {EngineKind::certified, EngineKind::uncertified})
        for (auto kind : {StrategyKind::crash, StrategyKind::inflation, StrategyKind::inflation_ddos,
                          StrategyKind::equivocator, StrategyKind::phantom_post})
            for (std::uint64_t seed = 1; seed <= 24; ++seed)
                prop_cfgs.push_back(churn_config(engine, kind, seed % 3 == 0 ? 7 : 4, seed));
    report(6, "fallback property suite", property_suite(parallel_map<PropertyRun>(prop_cfgs, run_properties)));

    report(7, "oracle equivalence", oracle_equivalence(safety));

    const auto again = parallel_map<SafetyRun>(safety_cfgs, run_safety);
    report(8, "determinism", determinism(safety, again, {config_path("inflation_no_fallback.ini"), config_path("inflation_with_fallback.ini")}));

    std::printf("elapsed %.1fs\n", std::chrono::duration<double>(clock::now() - t0).count());
    return failures ? 1 : 0;
}
