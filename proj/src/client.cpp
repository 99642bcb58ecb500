#include "triad/client.hpp"

#include <fstream>

namespace triad {

ScanOutcome scan_log(MonitorState& state, const std::string& log_path,
                     const AgentId& discoverer) {
    ScanOutcome outcome;
    std::ifstream in(log_path, std::ios::binary);
    if (!in.is_open()) return outcome;
    in.seekg(static_cast<std::streamoff>(state.byte_offset));

    std::string line;
    while (std::getline(in, line)) {
        if (in.eof()) break;  // partial trailing line: wait for the newline
        LogEntry entry;
        try {
            entry = log_entry_from_line(line);
        } catch (const LogCorruptError& e) {
            outcome.corruption = e.what();
            return outcome;
        }
        const std::uint64_t index = state.entry_index;
        state.byte_offset += line.size() + 1;
        state.entry_index += 1;
        outcome.scanned += 1;
        if (entry.ok) continue;
        DedupKey key{entry.defect_type, entry.operation_name};
        if (!state.reported.insert(key).second) continue;

        DefectReport report;
        report.operation_name = entry.operation_name;
        report.defect_type = entry.defect_type;
        report.provoking_case.id = "disc-" + std::to_string(index);
        report.provoking_case.operation_name = entry.operation_name;
        report.provoking_case.input = entry.input;
        report.provoking_case.defect_type = entry.defect_type;
        report.provoking_case.origin = discoverer.role == AgentRole::Mua
                                           ? CaseOrigin::DiscoveredByMua
                                           : CaseOrigin::DiscoveredByCca;
        report.discovered_by = discoverer;
        report.context = entry.context;
        report.timestamp = entry.tick;
        outcome.reports.push_back(std::move(report));
    }
    return outcome;
}

ClientAgent::ClientAgent(int instance, std::string client_id, SutSimulator& sut,
                         std::string log_path, AgentId mca)
    : instance_(instance),
      client_id_(std::move(client_id)),
      sut_(sut),
      log_path_(std::move(log_path)),
      mca_(std::move(mca)) {}

void ClientAgent::on_envelope(Bus& bus, const Envelope& envelope) {
    if (const auto* request = std::get_if<TestRequest>(&envelope.body)) {
        queue_.emplace_back(*request, envelope.header);
        begin_next(bus);
        return;
    }
    if (std::get_if<StatusQuery>(&envelope.body) != nullptr) {
        Envelope reply;
        reply.header.message_id = bus.next_message_id(id());
        reply.header.sender = id();
        reply.header.recipient = envelope.header.sender;
        reply.header.correlation_id = envelope.header.message_id;
        reply.header.timestamp = bus.now();
        reply.body = StatusReply{busy()};
        bus.send(reply);
        return;
    }
}

void ClientAgent::begin_next(Bus& bus) {
    if (run_ || queue_.empty()) return;
    auto [request, header] = std::move(queue_.front());
    queue_.pop_front();
    const ExecMode mode = exec_mode_for(request.testing_type);
    run_ = make_suite_run(std::move(request), header.sender, header.message_id, mode, client_id_,
                          bus.now());
    bus.schedule_timer(id(), "step", 1);
}

void ClientAgent::on_timer(Bus& bus, Tick now, const std::string& timer_id) {
    if (timer_id == "monitor") {
        if (!run_) do_scan(bus);
        return;
    }
    if (timer_id != "step" || !run_) return;
    if (run_finished(*run_, now)) {
        ResultReport report = finish_run(*run_, sut_.model(), now);
        Envelope out;
        out.header.message_id = bus.next_message_id(id());
        out.header.sender = id();
        out.header.recipient = run_->reply_to;
        out.header.correlation_id = run_->correlation_id;
        out.header.timestamp = now;
        out.body = std::move(report);
        bus.send(out);
        run_.reset();
        if (!queue_.empty()) {
            begin_next(bus);
        } else {
            bus.schedule_timer(id(), "monitor", 1);  // catch up on paused monitoring
        }
        return;
    }
    Tick cost = run_one_case(*run_, sut_, bus, id(), mca_);
    bus.schedule_timer(id(), "step", cost);
}

void ClientAgent::do_scan(Bus& bus) {
    ScanOutcome outcome = scan_log(monitor_, log_path_, id());
    for (DefectReport& report : outcome.reports) {
        Envelope notice;
        notice.header.message_id = bus.next_message_id(id());
        notice.header.sender = id();
        notice.header.recipient = mca_;
        notice.header.timestamp = bus.now();
        notice.body = DefectNotice{std::move(report)};
        bus.send(notice);
    }
}

}  // namespace triad
