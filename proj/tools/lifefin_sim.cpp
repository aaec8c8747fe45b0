#include <lifefin/harness.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace lifefin;

int main(int argc, char** argv) {
    CLI::App app{"DAG consensus simulator with fallback recovery"};
    std::string config_path, engine, strategy, out_path, format = "csv";
    std::optional<std::uint32_t> n, f;
    std::optional<std::uint64_t> seed;
    std::optional<SimTime> duration;
    bool no_fallback = false, quiet = false;

    app.add_option("--config", config_path, "scenario file (sectioned key = value)");
    app.add_option("--engine", engine, "certified|uncertified (sailfish|mysticeti)");
    app.add_option("--n", n, "number of nodes");
    app.add_option("--f", f, "fault bound");
    app.add_option("--seed", seed, "simulation seed");
    app.add_option("--duration", duration, "simulated milliseconds");
    app.add_option("--strategy", strategy,
                   "honest|crash|inflation|inflation+ddos|equivocator|phantom-post");
    app.add_option("--out", out_path, "metrics output path");
    app.add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--no-lifefin", no_fallback, "disable the fallback path");
    app.add_flag("-q,--quiet", quiet, "only print the verdict line");
    CLI11_PARSE(app, argc, argv);

    ScenarioConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path, cfg);
        if (!engine.empty()) {
            auto e = parse_engine(engine);
            if (!e) throw ConfigError("engine", "unknown engine '" + engine + "'");
            cfg.engine = *e;
        }
        if (n) cfg.n = *n;
        if (f) cfg.f = *f;
        if (n && !f) cfg.f = (*n - 1) / 3;
        if (seed) cfg.seed = *seed;
        if (duration) cfg.duration = *duration;
        if (!strategy.empty()) {
            auto k = parse_strategy(strategy);
            if (!k) throw ConfigError("strategy", "unknown strategy '" + strategy + "'");
            cfg.adversary.kind = *k;
        }
        if (no_fallback) cfg.fallback.enabled = false;
        validate(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    Scenario sim(cfg);
    sim.run();
    const auto metrics = sim.metrics();
    const auto report = sim.audit();
    const auto hash = sim.trace_hash();

    if (!out_path.empty()) {
        try {
            export_metrics(metrics, format, out_path);
        } catch (const std::exception& e) {
            std::cerr << "export failed: " << e.what() << "\n";
            return 2;
        }
    }

    if (!quiet) {
        const auto correct = sim.correct_nodes();
        std::cout << "engine=" << to_string(cfg.engine) << " n=" << cfg.n << " f=" << cfg.f
                  << " strategy=" << to_string(cfg.adversary.kind) << " seed=" << cfg.seed
                  << " duration_ms=" << cfg.duration
                  << " fallback=" << (cfg.fallback.enabled ? "on" : "off") << "\n";
        for (NodeId id : correct) {
            const auto& node = sim.node(id);
            std::cout << "node " << id << ": ordered=" << node.ordered().size()
                      << " leaders=" << node.commits().size() << " round=" << node.current_round()
                      << " ub=" << node.store().uncommitted_bytes()
                      << " fallbacks=" << node.fallbacks().size()
                      << (sim.net().memory().account(id).ever_exhausted ? " exhausted" : "") << "\n";
        }
        if (!report.safety.pass) {
            const auto& d = *report.safety.first;
            std::cout << "safety: FAIL at index " << d.index << " (nodes " << d.a << ", " << d.b
                      << ": " << short_hex(d.va.digest) << " vs " << short_hex(d.vb.digest) << ")\n";
        } else {
            std::cout << "safety: pass\n";
        }
        for (const auto& inv : report.invariants)
            std::cout << "invariant " << inv.name << ": " << (inv.pass ? "pass" : "FAIL")
                      << (inv.detail.empty() ? "" : " (" + inv.detail + ")") << "\n";
        std::size_t live = 0;
        for (const auto& w : report.liveness) live += w.pass;
        std::cout << "liveness windows with commits: " << live << "/" << report.liveness.size() << "\n";
    }
    std::cout << "trace " << to_hex(hash) << " audit " << (report.pass() ? "pass" : "FAIL") << "\n";
    return report.pass() ? 0 : 1;
}
