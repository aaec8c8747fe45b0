#pragma once

#include <lifefin/rbc.hpp>

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>

namespace lifefin {

// Common coin: H(seed, view, slot, round) low bit, identical at every node.
bool common_coin(std::uint64_t seed, std::uint64_t view, NodeId slot, std::uint32_t round);

enum class AbaType : std::uint8_t { bval, aux, finish };

struct AbaMessage final : Message {
    std::uint64_t view = 0;
    NodeId slot = 0;
    std::uint32_t round = 0;
    AbaType type = AbaType::bval;
    std::uint8_t value = 0;

    MsgClass cls() const override { return MsgClass::fallback; }
    const char* kind() const override;
    std::size_t size() const override { return 24; }
    std::uint64_t tag() const override {
        return (view << 24) ^ (static_cast<std::uint64_t>(slot) << 16) ^ (round << 4) ^
               (static_cast<std::uint64_t>(type) << 1) ^ value;
    }
};

// Binary agreement for one slot: signature-free rounds (BVAL/AUX) with a common
// coin, plus a FINISH exchange so that deciders can stop.
class Aba {
public:
    using Broadcast = std::function<void(AbaType, std::uint32_t round, std::uint8_t value)>;

    Aba(std::uint32_t n, std::uint32_t f, std::uint64_t seed, std::uint64_t view, NodeId slot,
        Broadcast bcast);

    void input(std::uint8_t b);
    bool has_input() const { return est_.has_value(); }
    void on_message(NodeId from, const AbaMessage& m);
    std::optional<std::uint8_t> decision() const { return decided_; }
    std::uint32_t rounds_used() const { return round_ + 1; }

private:
    struct RoundState {
        std::array<std::set<NodeId>, 2> bval_from;
        std::array<bool, 2> bval_sent{false, false};
        std::set<std::uint8_t> bin_values;
        bool aux_sent = false;
        std::map<NodeId, std::uint8_t> aux_from;
    };

    void send_bval(std::uint32_t r, std::uint8_t b);
    void try_finish_round();
    void decide(std::uint8_t b);

    std::uint32_t n_, f_;
    std::uint64_t seed_, view_;
    NodeId slot_;
    Broadcast bcast_;
    std::optional<std::uint8_t> est_;
    std::uint32_t round_ = 0;
    std::map<std::uint32_t, RoundState> rounds_;
    std::optional<std::uint8_t> decided_;
    bool finish_sent_ = false;
    bool halted_ = false;
    std::array<std::set<NodeId>, 2> finish_from_;
};

struct AcsOutput {
    std::vector<std::pair<NodeId, std::shared_ptr<const Bytes>>> proposals;  // slot ascending
};

// One ACS instance (one fallback view) at one node: n reliable-broadcast slots
// and n binary agreements, BKR style.
class AcsInstance {
public:
    using Send = std::function<void(NodeId to, MessagePtr)>;
    using Validator = std::function<bool(NodeId slot, const Bytes& proposal)>;

    AcsInstance(std::uint32_t n, std::uint32_t f, NodeId self, std::uint64_t view,
                std::uint64_t coin_seed, Send send, Validator validate);

    // Invalid proposals are rejected here and never broadcast.
    bool propose(std::shared_ptr<const Bytes> proposal);
    bool proposed() const { return proposed_; }
    void on_rbc(NodeId from, const RbcMessage& m);
    void on_aba(NodeId from, const AbaMessage& m);

    bool decided() const { return output_.has_value(); }
    const std::optional<AcsOutput>& output() const { return output_; }
    std::uint64_t view() const { return view_; }
    std::uint32_t max_aba_rounds() const;

private:
    void on_slot_delivered(NodeId slot, const std::shared_ptr<const Bytes>& payload);
    void check_progress();

    std::uint32_t n_, f_;
    NodeId self_;
    std::uint64_t view_;
    Send send_;
    Validator validate_;
    RbcEngine rbc_;
    std::vector<Aba> aba_;
    std::vector<std::shared_ptr<const Bytes>> delivered_;
    bool proposed_ = false;
    bool zeros_filled_ = false;
    std::optional<AcsOutput> output_;
};

}  // namespace lifefin
