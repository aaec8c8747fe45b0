#include <lifefin/simnet.hpp>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <stdexcept>

namespace lifefin {

std::uint64_t tag_of(const Digest& d) {
    std::uint64_t t = 0;
    for (int i = 0; i < 8; ++i) t = (t << 8) | d[i];
    return t;
}

MemoryMeter::MemoryMeter(std::uint32_t n, std::size_t limit, std::size_t reserve) : acc_(n) {
    for (auto& a : acc_) {
        a.limit = limit;
        a.reserve = reserve;
    }
}

ChargeResult MemoryMeter::charge(NodeId node, std::size_t bytes, ChargeClass cls) {
    auto& a = acc_.at(node);
    if (cls == ChargeClass::dag) {
        if (a.used >= a.limit) {
            a.ever_exhausted = true;
            return ChargeResult::exhausted;
        }
        a.used += bytes;
        if (a.used >= a.limit) a.ever_exhausted = true;
        return ChargeResult::ok;
    }
    if (a.reserve_used + bytes > a.reserve) return ChargeResult::exhausted;
    a.reserve_used += bytes;
    a.reserve_peak = std::max(a.reserve_peak, a.reserve_used);
    return ChargeResult::ok;
}

void MemoryMeter::refund(NodeId node, std::size_t bytes, ChargeClass cls) {
    auto& a = acc_.at(node);
    auto& slot = cls == ChargeClass::dag ? a.used : a.reserve_used;
    slot -= std::min(slot, bytes);
}

SimNet::SimNet(std::uint32_t n, NetConfig cfg, std::size_t mem_limit, std::size_t mem_reserve)
    : n_(n),
      cfg_(cfg),
      mem_(n, mem_limit, mem_reserve),
      procs_(n, nullptr),
      crash_at_(n, kNever),
      parked_(n),
      rng_(cfg.seed ^ 0x9e3779b97f4a7c15ULL) {
    if (cfg_.delta <= 0) throw std::invalid_argument("delta must be positive");
}

SimTime SimNet::delay_for(NodeId from, NodeId to) {
    if (from == to) return 0;
    const SimTime d = cfg_.delta;
    if (now_ < cfg_.gst) {
        const SimTime span = cfg_.pre_gst_max_delay_factor * d + 1;
        SimTime delay = static_cast<SimTime>(rng_() % static_cast<std::uint64_t>(span));
        // Held messages still land by gst + delta.
        return std::min(delay, cfg_.gst + d - now_);
    }
    return 1 + static_cast<SimTime>(rng_() % static_cast<std::uint64_t>(d));
}

std::optional<Envelope> SimNet::send(NodeId from, NodeId to, MessagePtr msg) {
    if (crashed(from)) return std::nullopt;
    if (msg->cls() == MsgClass::dag && mem_.exhausted(from)) {
        ++stats_.rejected_sender_exhausted;
        return std::nullopt;
    }
    Envelope env{from, to, std::move(msg), now_, 0, ++seq_};
    env.deliver_time = now_ + delay_for(from, to);
    if (env.send_time >= cfg_.gst && env.deliver_time > std::max(env.send_time, cfg_.gst) + cfg_.delta)
        ++stats_.post_gst_bound_violations;
    ++stats_.sent;
    Event ev{env.deliver_time, env.seq, EvKind::deliver, env, 0};
    queue_.push(std::move(ev));
    return env;
}

void SimNet::multicast(NodeId from, const MessagePtr& msg) {
    for (NodeId to = 0; to < n_; ++to) send(from, to, msg);
}

void SimNet::set_timer(NodeId node, SimTime at, std::uint64_t tag) {
    Event ev{std::max(at, now_), ++seq_, EvKind::timer, Envelope{node, node, nullptr, now_, 0, 0}, tag};
    queue_.push(std::move(ev));
}

void SimNet::crash(NodeId node, SimTime at) { crash_at_.at(node) = at; }

void SimNet::add_ddos(DdosWindow w) {
    if (w.target >= n_) throw std::invalid_argument("ddos target out of range");
    ddos_.push_back(w);
    if (w.until != kNever) {
        Event ev{w.until, ++seq_, EvKind::release, {}, w.target};
        queue_.push(std::move(ev));
    }
}

void SimNet::release_ddos(NodeId target, SimTime at) {
    at = std::max(at, now_);
    for (auto& w : ddos_) {
        if (w.target == target && w.until == kNever) {
            w.until = at;
            Event ev{at, ++seq_, EvKind::release, {}, target};
            queue_.push(std::move(ev));
        }
    }
}

bool SimNet::suppressed(NodeId target, SimTime t) const {
    for (const auto& w : ddos_)
        if (w.target == target && t >= w.from && t < w.until) return true;
    return false;
}

void SimNet::trace(const char* kind, NodeId from, NodeId to, const char* mkind, std::uint64_t tag) {
    char buf[160];
    int len = std::snprintf(buf, sizeof buf, "%" PRId64 " %s %u %u %s:%016" PRIx64 "\n", now_, kind,
                            from, to, mkind, tag);
    trace_.update(reinterpret_cast<const std::uint8_t*>(buf), static_cast<std::size_t>(len));
    if (cfg_.keep_trace_lines) lines_.emplace_back(buf, static_cast<std::size_t>(len) - 1);
}

void SimNet::dispatch(Event& ev) {
    switch (ev.kind) {
        case EvKind::timer: {
            NodeId node = ev.env.from;
            if (crashed(node) || !procs_[node]) return;
            trace("timer", node, node, "t", ev.tag);
            procs_[node]->on_timer(ev.tag);
            return;
        }
        case EvKind::release: {
            auto target = static_cast<NodeId>(ev.tag);
            if (suppressed(target, now_)) return;
            auto parked = std::move(parked_[target]);
            parked_[target].clear();
            for (auto& env : parked) {
                env.deliver_time = now_ + 1 + static_cast<SimTime>(rng_() % static_cast<std::uint64_t>(cfg_.delta));
                env.seq = ++seq_;
                Event again{env.deliver_time, env.seq, EvKind::deliver, env, 0};
                queue_.push(std::move(again));
            }
            return;
        }
        case EvKind::deliver: {
            Envelope& env = ev.env;
            if (crashed(env.to) || !procs_[env.to]) return;
            if (env.from != env.to && suppressed(env.to, now_)) {
                ++stats_.suppressed;
                parked_[env.to].push_back(std::move(env));
                return;
            }
            if (env.msg->cls() == MsgClass::dag && mem_.exhausted(env.to)) {
                ++stats_.dropped_exhausted;
                trace("drop", env.from, env.to, env.msg->kind(), env.msg->tag());
                return;
            }
            ++stats_.delivered;
            trace("deliver", env.from, env.to, env.msg->kind(), env.msg->tag());
            procs_[env.to]->on_message(env.from, env.msg);
            return;
        }
    }
}

bool SimNet::step() {
    if (queue_.empty()) return false;
    now_ = queue_.top().time;
    while (!queue_.empty() && queue_.top().time == now_) {
        Event ev = queue_.top();
        queue_.pop();
        dispatch(ev);
    }
    return true;
}

void SimNet::run_until(SimTime end) {
    while (!queue_.empty() && queue_.top().time <= end) step();
    now_ = std::max(now_, end);
}

Digest SimNet::trace_hash() { return trace_.finish(); }

}  // namespace lifefin
