#include <doctest.h>

#include <lifefin/adversary.hpp>

using namespace lifefin;

TEST_CASE("default placement keeps faulty leaders apart") {
    CHECK(default_byzantine(4, 1) == std::vector<NodeId>{1});
    CHECK(default_byzantine(10, 3) == std::vector<NodeId>{1, 4, 7});
    CHECK(default_byzantine(20, 6) == std::vector<NodeId>{1, 4, 7, 10, 13, 16});
    CHECK(default_ddos_target(10, {1, 4, 7}) == 9);
    CHECK(default_ddos_target(4, {3}) == 2);
}

TEST_CASE("strategy validation") {
    AdversaryConfig c;
    c.kind = StrategyKind::inflation;
    c.byzantine = {0, 1};
    CHECK_THROWS_AS(Strategy(c, 4, 1), std::invalid_argument);
    c.byzantine = {4};
    CHECK_THROWS_AS(Strategy(c, 4, 1), std::invalid_argument);
    c.byzantine = {2, 2};
    CHECK_THROWS_AS(Strategy(c, 7, 2), std::invalid_argument);

    AdversaryConfig d;
    d.kind = StrategyKind::inflation_ddos;
    d.ddos_target = 1;  // the default Byzantine node
    CHECK_THROWS_AS(Strategy(d, 4, 1), std::invalid_argument);
    d.ddos_target = 3;
    d.ddos_from = 500;
    d.ddos_until = 500;
    CHECK_THROWS_AS(Strategy(d, 4, 1), std::invalid_argument);

    AdversaryConfig e;
    e.kind = StrategyKind::crash;
    e.crash_count = 2;
    CHECK_THROWS_AS(Strategy(e, 4, 1), std::invalid_argument);
}

TEST_CASE("hooks switch on at the attack start and only for faulty nodes") {
    AdversaryConfig c;
    c.kind = StrategyKind::inflation_ddos;
    c.attack_start = 1000;
    Strategy s(c, 10, 3);
    CHECK(s.byzantine_set() == std::set<NodeId>{1, 4, 7});
    CHECK_FALSE(s.inflating(1, 999));
    CHECK(s.inflating(1, 1000));
    CHECK(s.exclude_leader_refs(4, 5000));
    CHECK(s.withhold_post_signature(7, 5000));
    CHECK_FALSE(s.inflating(2, 5000));
    CHECK_FALSE(s.equivocates(1, 5000));
    CHECK(s.config().ddos_target == NodeId{9});

    AdversaryConfig h;
    h.byzantine = {1};
    Strategy honest(h, 4, 1);
    CHECK(honest.byzantine_set().empty());
    CHECK_FALSE(honest.config().ddos_target);

    AdversaryConfig q;
    q.kind = StrategyKind::equivocator;
    Strategy eq(q, 4, 1);
    CHECK(eq.equivocates(1, 0));
    CHECK_FALSE(eq.phantom_posts(1, 0));
    CHECK_FALSE(eq.config().ddos_target);
}

TEST_CASE("crash and ddos installation on the network") {
    AdversaryConfig c;
    c.kind = StrategyKind::crash;
    c.crash_at = 300;
    Strategy s(c, 7, 2);
    SimNet net(7, NetConfig{}, 1 << 20, 1 << 10);
    s.install(net);
    net.run_until(299);
    CHECK_FALSE(net.crashed(1));
    net.run_until(300);
    CHECK(net.crashed(1));
    CHECK(net.crashed(4));
    CHECK_FALSE(net.crashed(0));

    AdversaryConfig d;
    d.kind = StrategyKind::inflation_ddos;
    d.ddos_from = 100;
    d.ddos_release_after_trigger = 2000;
    Strategy t(d, 4, 1);
    SimNet net2(4, NetConfig{}, 1 << 20, 1 << 10);
    t.install(net2);
    CHECK(net2.suppressed(3, 100));
    CHECK(net2.suppressed(3, 1000000));  // open until a trigger
    t.on_fallback_trigger(net2, 5000);
    t.on_fallback_trigger(net2, 9000);  // only the first trigger counts
    CHECK(net2.suppressed(3, 6999));
    CHECK_FALSE(net2.suppressed(3, 7000));
}

TEST_CASE("strategy names round trip") {
    for (auto k : {StrategyKind::honest, StrategyKind::crash, StrategyKind::inflation, StrategyKind::inflation_ddos,
                   StrategyKind::equivocator, StrategyKind::phantom_post})
        CHECK(parse_strategy(to_string(k)) == k);
    CHECK_FALSE(parse_strategy("nope"));
}
