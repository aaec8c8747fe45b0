#pragma once

#include <lifefin/simnet.hpp>

#include <functional>
#include <map>
#include <set>

namespace lifefin {

// Instance id: (round, sender) for DAG vertices, (view, slot) inside ACS.
struct RbcId {
    std::uint64_t round = 0;
    NodeId sender = 0;
    auto operator<=>(const RbcId&) const = default;
};

enum class RbcPhase : std::uint8_t { propose, echo, ready, request, reply };
const char* to_string(RbcPhase p);

struct RbcMessage final : Message {
    MsgClass klass = MsgClass::dag;
    RbcId id;
    RbcPhase phase = RbcPhase::propose;
    Digest digest{};
    std::shared_ptr<const Bytes> payload;  // propose and reply only

    MsgClass cls() const override { return klass; }
    const char* kind() const override;
    std::size_t size() const override { return 56 + (payload ? payload->size() : 0); }
    std::uint64_t tag() const override { return tag_of(digest) ^ (id.round << 8) ^ id.sender; }
};

struct RbcEvent {
    enum class Kind { first_message, delivered } kind;
    RbcId id;
    std::shared_ptr<const Bytes> payload;
    Digest digest{};
};

// Bracha broadcast for many instances at one node. Echo quorum 2f+1, ready
// amplification at f+1, delivery on 2f+1 readies. Echo and ready carry only the
// digest; a node that reaches the ready quorum without the payload pulls it from
// the peers that echoed it.
class RbcEngine {
public:
    using SendFn = std::function<void(NodeId to, std::shared_ptr<const RbcMessage>)>;
    // Return false to withhold this node's echo/ready for an instance.
    using VoteFilter = std::function<bool(const RbcId&, const Digest&)>;

    RbcEngine(std::uint32_t n, std::uint32_t f, NodeId self, MsgClass cls, SendFn send);

    // Rejects (returns false) a second broadcast for the same instance or a
    // broadcast for an instance this node does not own.
    bool broadcast(const RbcId& id, std::shared_ptr<const Bytes> payload);
    std::vector<RbcEvent> on_message(NodeId from, const RbcMessage& msg);

    void set_vote_filter(VoteFilter f) { filter_ = std::move(f); }
    std::uint64_t malformed() const { return malformed_; }
    bool delivered(const RbcId& id) const;
    void forget_before(std::uint64_t round);  // drops finished instances below round

    static std::shared_ptr<const RbcMessage> make(MsgClass cls, const RbcId& id, RbcPhase phase,
                                                  const Digest& d,
                                                  std::shared_ptr<const Bytes> payload = nullptr);

private:
    struct Instance {
        bool first_fired = false;
        bool echoed = false;
        bool readied = false;
        bool delivered = false;
        std::set<NodeId> asked;  // payload requests sent
        std::map<Digest, std::set<NodeId>> echoes;
        std::map<Digest, std::set<NodeId>> readies;
        std::map<Digest, std::shared_ptr<const Bytes>> payloads;
    };

    void multicast(const std::shared_ptr<const RbcMessage>& m);
    void maybe_progress(const RbcId& id, Instance& inst, const Digest& d, std::vector<RbcEvent>& out);

    std::uint32_t n_, f_;
    NodeId self_;
    MsgClass cls_;
    SendFn send_;
    VoteFilter filter_;
    std::map<RbcId, Instance> inst_;
    std::set<RbcId> broadcasted_;
    std::uint64_t malformed_ = 0;
};

}  // namespace lifefin
