#include "triad/bus.hpp"

#include <algorithm>

namespace triad {

SimBus::SimBus(SimBusConfig config) : config_(config), rng_(config.seed) {}

void SimBus::register_agent(Agent& agent) {
    const AgentId id = agent.id();
    if (agents_.count(id))
        throw DuplicateAgentError("agent " + id.str() + " is already registered");
    agents_[id] = &agent;
    agent.on_start(*this);
}

void SimBus::unregister_agent(const AgentId& agent) { agents_.erase(agent); }

std::string SimBus::next_message_id(const AgentId& sender) {
    return sender.str() + ":" + std::to_string(++id_counters_[sender]);
}

void SimBus::push_event(Tick due, Event event) {
    events_.emplace(std::pair{due, ++seq_}, std::move(event));
}

void SimBus::send(const Envelope& envelope) {
    serialize(envelope);  // reject non-canonical payloads at the door
    ++send_count_;

    const auto pair_key = std::pair{envelope.header.sender, envelope.header.recipient};
    Tick due = now_ + 1 + static_cast<Tick>(rng_() % 3);
    std::uint32_t attempt = 1;
    if (config_.drop_every != 0 && send_count_ % config_.drop_every == 0) {
        ++injected_drops_;
        due += config_.retry_delay;  // first attempt lost; retransmit arrives later
        attempt = 2;
    }
    auto last = pair_last_due_.find(pair_key);
    if (last != pair_last_due_.end() && due < last->second) due = last->second;
    pair_last_due_[pair_key] = due;

    Event event;
    event.kind = Event::Kind::Deliver;
    event.envelope = envelope;
    event.attempt = attempt;
    push_event(due, std::move(event));

    if (config_.duplicate_every != 0 && send_count_ % config_.duplicate_every == 0) {
        Event dup;
        dup.kind = Event::Kind::Deliver;
        dup.envelope = envelope;
        dup.attempt = attempt + 1;
        push_event(due + 1 + static_cast<Tick>(rng_() % 2), std::move(dup));
    }
}

void SimBus::schedule_timer(const AgentId& agent, const std::string& timer_id, Tick delay) {
    Event event;
    event.kind = Event::Kind::Timer;
    event.agent = agent;
    event.timer_id = timer_id;
    push_event(now_ + std::max<Tick>(delay, 1), std::move(event));
}

void SimBus::schedule_action(Tick delay, std::function<void()> action) {
    Event event;
    event.kind = Event::Kind::Action;
    event.action = std::move(action);
    push_event(now_ + std::max<Tick>(delay, 1), std::move(event));
}

void SimBus::dispatch(Event& event) {
    switch (event.kind) {
        case Event::Kind::Deliver: {
            const AgentId& recipient = event.envelope.header.recipient;
            auto it = agents_.find(recipient);
            if (it == agents_.end()) {
                dead_letters_.push_back({now_, event.envelope, "unregistered recipient"});
                auto sender = agents_.find(event.envelope.header.sender);
                if (sender != agents_.end())
                    sender->second->on_dead_letter(*this, event.envelope,
                                                   "unregistered recipient");
                return;
            }
            if (!seen_[recipient].insert(event.envelope.header.message_id).second) {
                ++suppressed_duplicates_;
                return;
            }
            trace_.push_back({now_, event.envelope, event.attempt});
            ++deliveries_;
            it->second->on_envelope(*this, event.envelope);
            return;
        }
        case Event::Kind::Timer: {
            auto it = agents_.find(event.agent);
            if (it != agents_.end()) it->second->on_timer(*this, now_, event.timer_id);
            return;
        }
        case Event::Kind::Action:
            event.action();
            return;
    }
}

void SimBus::advance(Tick ticks) {
    const Tick target = now_ + ticks;
    while (!events_.empty() && events_.begin()->first.first <= target) {
        auto node = events_.extract(events_.begin());
        now_ = node.key().first;
        dispatch(node.mapped());
    }
    now_ = target;
}

Tick SimBus::run_until_quiescent() {
    while (!events_.empty()) {
        const Tick next = events_.begin()->first.first;
        if (next > config_.max_ticks) break;
        advance(next - now_);
    }
    return now_;
}

}  // namespace triad
