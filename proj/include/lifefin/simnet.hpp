#pragma once

#include <lifefin/bytes.hpp>
#include <lifefin/crypto.hpp>

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

namespace lifefin {

constexpr SimTime kNever = std::numeric_limits<SimTime>::max() / 4;

enum class MsgClass { dag, fallback };

struct Message {
    virtual ~Message() = default;
    virtual MsgClass cls() const = 0;
    virtual const char* kind() const = 0;
    virtual std::size_t size() const = 0;
    // Short content tag for the trace line.
    virtual std::uint64_t tag() const = 0;
};
using MessagePtr = std::shared_ptr<const Message>;

std::uint64_t tag_of(const Digest& d);

struct Envelope {
    NodeId from = 0;
    NodeId to = 0;
    MessagePtr msg;
    SimTime send_time = 0;
    SimTime deliver_time = 0;
    std::uint64_t seq = 0;
};

class Process {
public:
    virtual ~Process() = default;
    virtual void on_message(NodeId from, const MessagePtr& msg) = 0;
    virtual void on_timer(std::uint64_t tag) = 0;
};

enum class ChargeClass { dag, fallback };
enum class ChargeResult { ok, exhausted };

// Per-node byte budget. DAG charges fail once used >= limit; fallback charges
// draw on a separate reserve and fail only above it.
class MemoryMeter {
public:
    struct Account {
        std::size_t used = 0;
        std::size_t limit = 0;
        std::size_t reserve_used = 0;
        std::size_t reserve = 0;
        std::size_t reserve_peak = 0;
        bool ever_exhausted = false;
    };

    MemoryMeter(std::uint32_t n, std::size_t limit, std::size_t reserve);

    ChargeResult charge(NodeId node, std::size_t bytes, ChargeClass cls);
    void refund(NodeId node, std::size_t bytes, ChargeClass cls);
    bool exhausted(NodeId node) const { return acc_[node].used >= acc_[node].limit; }
    const Account& account(NodeId node) const { return acc_[node]; }
    void reset_reserve_peak(NodeId node) { acc_[node].reserve_peak = acc_[node].reserve_used; }

private:
    std::vector<Account> acc_;
};

struct NetConfig {
    SimTime delta = 100;
    SimTime gst = 0;
    std::uint64_t seed = 1;
    SimTime pre_gst_max_delay_factor = 20;  // pre-GST delay drawn from [0, factor*delta]
    bool keep_trace_lines = false;
};

struct DdosWindow {
    NodeId target = 0;
    SimTime from = 0;
    SimTime until = kNever;  // kNever until released
};

struct NetStats {
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped_exhausted = 0;
    std::uint64_t rejected_sender_exhausted = 0;
    std::uint64_t suppressed = 0;
    std::uint64_t post_gst_bound_violations = 0;
};

class SimNet {
public:
    SimNet(std::uint32_t n, NetConfig cfg, std::size_t mem_limit, std::size_t mem_reserve);

    std::uint32_t n() const { return n_; }
    SimTime now() const { return now_; }
    const NetConfig& config() const { return cfg_; }
    MemoryMeter& memory() { return mem_; }
    const MemoryMeter& memory() const { return mem_; }
    const NetStats& stats() const { return stats_; }

    void attach(NodeId id, Process* p) { procs_.at(id) = p; }

    // Returns the scheduled envelope, or nothing when the sender is exhausted
    // (DAG class) or crashed.
    std::optional<Envelope> send(NodeId from, NodeId to, MessagePtr msg);
    void multicast(NodeId from, const MessagePtr& msg);  // includes self
    void set_timer(NodeId node, SimTime at, std::uint64_t tag);

    void crash(NodeId node, SimTime at);
    bool crashed(NodeId node) const { return now_ >= crash_at_[node]; }

    void add_ddos(DdosWindow w);
    // Closes an open window on target at time `at` (>= now).
    void release_ddos(NodeId target, SimTime at);
    bool suppressed(NodeId target, SimTime t) const;

    // Advances to the next event time and delivers everything due at it.
    // Returns false when the queue is empty.
    bool step();
    void run_until(SimTime end);
    bool idle() const { return queue_.empty(); }

    Digest trace_hash();  // hash of the trace so far; consumes the stream state
    const std::vector<std::string>& trace_lines() const { return lines_; }

    std::uint64_t rand_u64() { return rng_(); }

private:
    enum class EvKind : std::uint8_t { deliver, timer, release };
    struct Event {
        SimTime time;
        std::uint64_t seq;
        EvKind kind;
        Envelope env;      // deliver
        std::uint64_t tag; // timer tag / release target
        bool operator>(const Event& o) const {
            return time != o.time ? time > o.time : seq > o.seq;
        }
    };

    SimTime delay_for(NodeId from, NodeId to);
    void trace(const char* kind, NodeId from, NodeId to, const char* mkind, std::uint64_t tag);
    void dispatch(Event& ev);

    std::uint32_t n_;
    NetConfig cfg_;
    MemoryMeter mem_;
    std::vector<Process*> procs_;
    std::vector<SimTime> crash_at_;
    std::vector<DdosWindow> ddos_;
    std::vector<std::vector<Envelope>> parked_;
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
    std::mt19937_64 rng_;
    SimTime now_ = 0;
    std::uint64_t seq_ = 0;
    NetStats stats_;
    Sha256Stream trace_;
    std::vector<std::string> lines_;
};

}  // namespace lifefin
