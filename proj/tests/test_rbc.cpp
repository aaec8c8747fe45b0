#include <doctest.h>

#include <lifefin/rbc.hpp>

#include <map>

#include "support.hpp"

using namespace lifefin;

namespace {

struct Pending {
    NodeId from, to;
    std::shared_ptr<const RbcMessage> msg;
};

// Hand-driven scheduler: every step delivers one pending message chosen by the
// seeded rng. Node `byz` has no engine; its traffic is injected by the test.
struct Cluster {
    std::uint32_t n, f;
    std::vector<std::unique_ptr<RbcEngine>> eng;
    std::vector<Pending> pending;
    std::map<NodeId, std::vector<RbcEvent>> events;
    std::optional<NodeId> byz;

    Cluster(std::uint32_t n_, std::uint32_t f_, std::optional<NodeId> byzantine = std::nullopt)
        : n(n_), f(f_), byz(byzantine) {
        for (NodeId i = 0; i < n; ++i) {
            if (byz && *byz == i) {
                eng.emplace_back();
                continue;
            }
            eng.push_back(std::make_unique<RbcEngine>(n, f, i, MsgClass::dag,
                                                      [this, i](NodeId to, std::shared_ptr<const RbcMessage> m) {
                                                          pending.push_back({i, to, std::move(m)});
                                                      }));
        }
    }
    void inject(NodeId from, NodeId to, std::shared_ptr<const RbcMessage> m) {
        pending.push_back({from, to, std::move(m)});
    }
    void drain(testkit::Rng& rng) {
        while (!pending.empty()) {
            std::size_t k = rng.below(pending.size());
            Pending p = pending[k];
            pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(k));
            if (!eng[p.to]) continue;
            for (auto& e : eng[p.to]->on_message(p.from, *p.msg)) events[p.to].push_back(e);
        }
    }
    std::optional<Digest> delivered(NodeId i) const {
        auto it = events.find(i);
        if (it == events.end()) return std::nullopt;
        std::optional<Digest> d;
        int count = 0;
        for (auto& e : it->second)
            if (e.kind == RbcEvent::Kind::delivered) {
                d = e.digest;
                ++count;
            }
        CHECK(count <= 1);
        return d;
    }
    int first_messages(NodeId i) const {
        auto it = events.find(i);
        int c = 0;
        if (it != events.end())
            for (auto& e : it->second) c += e.kind == RbcEvent::Kind::first_message;
        return c;
    }
};

std::shared_ptr<const Bytes> bytes_of(std::uint8_t tag, std::size_t len = 40) {
    return std::make_shared<const Bytes>(len, tag);
}

}  // namespace

TEST_CASE("honest sender: everyone delivers the payload once, first message fires once") {
    testkit::Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        Cluster c(4, 1);
        auto payload = bytes_of(7);
        RbcId id{3, 2};
        REQUIRE(c.eng[2]->broadcast(id, payload));
        CHECK_FALSE(c.eng[2]->broadcast(id, payload));
        CHECK_FALSE(c.eng[1]->broadcast(id, payload));  // not the owner
        c.drain(rng);
        for (NodeId i = 0; i < 4; ++i) {
            auto d = c.delivered(i);
            REQUIRE(d);
            CHECK(*d == sha256(*payload));
            CHECK(c.first_messages(i) == 1);
            CHECK(c.eng[i]->delivered(id));
        }
    }
}

TEST_CASE("replayed propose and forged payload are ignored") {
    Cluster c(4, 1);
    testkit::Rng rng(2);
    auto payload = bytes_of(1);
    RbcId id{1, 0};
    c.eng[0]->broadcast(id, payload);
    auto again = RbcEngine::make(MsgClass::dag, id, RbcPhase::propose, sha256(*payload), payload);
    c.inject(0, 1, again);
    auto forged = RbcEngine::make(MsgClass::dag, id, RbcPhase::propose, sha256(*payload), bytes_of(2));
    c.inject(0, 2, forged);
    auto spoofed = RbcEngine::make(MsgClass::dag, id, RbcPhase::propose, sha256(*payload), payload);
    c.inject(3, 2, spoofed);  // not from the owner
    c.drain(rng);
    CHECK(c.first_messages(1) == 1);
    CHECK(c.eng[2]->malformed() == 2);
    for (NodeId i = 0; i < 4; ++i) CHECK(c.delivered(i));
}

// Byzantine sender 3, correct 0..2. Enumerate what each correct node is sent as
// a proposal (nothing, A, B) and how the sender votes, under many random
// interleavings each. Agreement and totality must hold in every run.
TEST_CASE("byzantine sender: agreement and totality over all proposal patterns") {
    const NodeId byz = 3;
    const RbcId id{5, byz};
    auto A = bytes_of(0xA), B = bytes_of(0xB);
    const Digest dA = sha256(*A), dB = sha256(*B);
    int deliveries = 0, runs = 0;
    for (int pattern = 0; pattern < 27; ++pattern) {
        for (int voting = 0; voting < 3; ++voting) {
            for (std::uint64_t seed = 0; seed < 30; ++seed) {
                Cluster c(4, 1, byz);
                testkit::Rng rng(seed * 131 + pattern * 7 + voting);
                int p = pattern;
                for (NodeId to = 0; to < 3; ++to, p /= 3) {
                    if (p % 3 == 1) c.inject(byz, to, RbcEngine::make(MsgClass::dag, id, RbcPhase::propose, dA, A));
                    if (p % 3 == 2) c.inject(byz, to, RbcEngine::make(MsgClass::dag, id, RbcPhase::propose, dB, B));
                }
                for (NodeId to = 0; to < 3; ++to) {
                    if (voting == 1) {
                        c.inject(byz, to, RbcEngine::make(MsgClass::dag, id, RbcPhase::echo, dA));
                        c.inject(byz, to, RbcEngine::make(MsgClass::dag, id, RbcPhase::ready, dA));
                    } else if (voting == 2) {
                        const Digest& e = to == 0 ? dA : dB;
                        c.inject(byz, to, RbcEngine::make(MsgClass::dag, id, RbcPhase::echo, e));
                        c.inject(byz, to, RbcEngine::make(MsgClass::dag, id, RbcPhase::ready, dB));
                    }
                }
                c.drain(rng);
                ++runs;
                std::optional<Digest> first;
                int delivered = 0;
                for (NodeId i = 0; i < 3; ++i) {
                    auto d = c.delivered(i);
                    if (!d) continue;
                    ++delivered;
                    if (!first) first = d;
                    CHECK(*d == *first);
                }
                CHECK((delivered == 0 || delivered == 3));
                deliveries += delivered > 0;
            }
        }
    }
    CHECK(runs == 27 * 3 * 30);
    CHECK(deliveries > 0);
}

TEST_CASE("crash after partial proposal: totality at every prefix") {
    // Sender 3 runs a real engine but only its first k propose messages leave.
    auto payload = bytes_of(9);
    for (int k = 0; k <= 4; ++k) {
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            Cluster c(4, 1);
            testkit::Rng rng(seed);
            c.eng[3]->broadcast(RbcId{2, 3}, payload);
            std::vector<Pending> keep;
            int sent = 0;
            for (auto& p : c.pending)
                if (p.to != 3 && sent++ < k) keep.push_back(p);
            c.pending = keep;
            c.eng[3].reset();  // crashed
            c.drain(rng);
            int delivered = 0;
            for (NodeId i = 0; i < 3; ++i) delivered += c.delivered(i).has_value();
            // the echo quorum needs all three correct nodes once the sender is gone
            CHECK(delivered == (k >= 3 ? 3 : 0));
        }
    }
}

namespace {

struct RbcProc : Process {
    SimNet* net;
    NodeId self;
    RbcEngine eng;
    std::vector<std::pair<SimTime, RbcEvent>> got;
    RbcProc(SimNet* nt, NodeId s)
        : net(nt), self(s), eng(4, 1, s, MsgClass::dag, [this](NodeId to, std::shared_ptr<const RbcMessage> m) {
              net->send(self, to, std::move(m));
          }) {}
    void on_message(NodeId from, const MessagePtr& m) override {
        for (auto& e : eng.on_message(from, static_cast<const RbcMessage&>(*m))) got.emplace_back(net->now(), e);
    }
    void on_timer(std::uint64_t) override {}
};

}  // namespace

TEST_CASE("after GST an honest broadcast delivers within three message delays") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        NetConfig cfg;
        cfg.delta = 100;
        cfg.seed = seed;
        SimNet net(4, cfg, 1 << 30, 1 << 20);
        std::vector<std::unique_ptr<RbcProc>> procs;
        for (NodeId i = 0; i < 4; ++i) {
            procs.push_back(std::make_unique<RbcProc>(&net, i));
            net.attach(i, procs.back().get());
        }
        net.run_until(1000);
        procs[seed % 4]->eng.broadcast(RbcId{1, static_cast<NodeId>(seed % 4)}, bytes_of(3));
        net.run_until(5000);
        for (auto& p : procs) {
            bool done = false;
            for (auto& [t, e] : p->got)
                if (e.kind == RbcEvent::Kind::delivered) {
                    done = true;
                    CHECK(t <= 1000 + 3 * cfg.delta);
                }
            CHECK(done);
        }
    }
}
