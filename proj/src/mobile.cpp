#include "triad/mobile.hpp"

namespace triad {

std::string_view to_string(MuaTask::State state) {
    switch (state) {
        case MuaTask::State::Dispatched: return "dispatched";
        case MuaTask::State::Running: return "running";
        case MuaTask::State::Reported: return "reported";
        case MuaTask::State::Expired: return "expired";
    }
    return "?";
}

MobileAgent::MobileAgent(int instance, SutSimulator& sut) : instance_(instance), sut_(sut) {}

void MobileAgent::on_envelope(Bus& bus, const Envelope& envelope) {
    const auto* dispatch = std::get_if<DispatchAgent>(&envelope.body);
    if (dispatch == nullptr || task_.has_value()) return;

    task_ = MuaTask{envelope.header.message_id, dispatch->target_client, dispatch->task,
                    bus.now(), MuaTask::State::Dispatched};

    auto deadline = dispatch->task.constraints.find("deadline");
    if (deadline != dispatch->task.constraints.end() && deadline->second == "0") {
        task_->state = MuaTask::State::Expired;
        Envelope out;
        out.header.message_id = bus.next_message_id(id());
        out.header.sender = id();
        out.header.recipient = envelope.header.sender;
        out.header.correlation_id = envelope.header.message_id;
        out.header.timestamp = bus.now();
        out.body = ResultReport{{}, std::nullopt, true};
        bus.send(out);
        bus.unregister_agent(id());
        return;
    }

    run_ = make_suite_run(dispatch->task, envelope.header.sender, envelope.header.message_id,
                          exec_mode_for(dispatch->task.testing_type), dispatch->target_client,
                          bus.now());
    task_->state = MuaTask::State::Running;
    bus.schedule_timer(id(), "step", 1);
}

void MobileAgent::on_timer(Bus& bus, Tick now, const std::string& timer_id) {
    if (timer_id != "step" || !run_) return;
    if (run_finished(*run_, now)) {
        finish(bus, now);
        return;
    }
    Tick cost = run_one_case(*run_, sut_, bus, id(), run_->reply_to);
    bus.schedule_timer(id(), "step", cost);
}

void MobileAgent::finish(Bus& bus, Tick now) {
    const bool expired = run_->next_case < run_->request.suite.cases.size();
    ResultReport report = finish_run(*run_, sut_.model(), now);
    task_->state = expired ? MuaTask::State::Expired : MuaTask::State::Reported;

    Envelope out;
    out.header.message_id = bus.next_message_id(id());
    out.header.sender = id();
    out.header.recipient = run_->reply_to;
    out.header.correlation_id = run_->correlation_id;
    out.header.timestamp = now;
    out.body = std::move(report);
    bus.send(out);
    run_.reset();
    bus.unregister_agent(id());
}

MuaPool::MuaPool(SutSimulator& sut, int capacity) : sut_(sut), capacity_(capacity) {}

int MuaPool::active_count() const {
    return static_cast<int>(reserved_.size() + live_.size() - done_.size());
}

AgentId MuaPool::reserve(const std::string& target_client) {
    if (!has_capacity()) {
        throw PoolExhaustedError("mobile agent pool exhausted (capacity " +
                                 std::to_string(capacity_) + ")");
    }
    if (sut_.model().find_client(target_client) == nullptr)
        throw UnknownClientError("unknown target client '" + target_client + "'");
    AgentId id = AgentId::mua(next_instance_++);
    reserved_.insert(id);
    return id;
}

void MuaPool::launch(Bus& bus, const AgentId& reserved) {
    reserved_.erase(reserved);
    auto agent = std::make_unique<MobileAgent>(reserved.instance, sut_);
    Agent& ref = *agent;
    live_.emplace(reserved, std::move(agent));
    bus.register_agent(ref);
}

AgentId MuaPool::dispatch(Bus& bus, const AgentId& sender, const std::string& target_client,
                          const TestRequest& task) {
    AgentId agent = reserve(target_client);
    launch(bus, agent);
    Envelope out;
    out.header.message_id = bus.next_message_id(sender);
    out.header.sender = sender;
    out.header.recipient = agent;
    out.header.timestamp = bus.now();
    out.body = DispatchAgent{target_client, task};
    bus.send(out);
    return agent;
}

void MuaPool::mark_done(const AgentId& agent) {
    if (live_.count(agent)) done_.insert(agent);
}

void MuaPool::reap() {
    for (const AgentId& agent : done_) live_.erase(agent);
    done_.clear();
}

}  // namespace triad
