#include "triad/user_log.hpp"

namespace triad {

std::string log_line(const LogEntry& entry) {
    Json outcome = Json::object();
    if (entry.ok) {
        outcome["status"] = "ok";
    } else {
        outcome["status"] = "error";
        outcome["defect_type"] = entry.defect_type;
        outcome["context"] = entry.context;
    }
    Json j = Json::object();
    j["tick"] = entry.tick;
    j["session"] = entry.session;
    j["operation_name"] = entry.operation_name;
    j["input"] = entry.input;
    j["outcome"] = std::move(outcome);
    return j.dump();
}

LogEntry log_entry_from_line(const std::string& line) {
    Json j;
    try {
        j = Json::parse(line);
    } catch (const Json::parse_error& e) {
        throw LogCorruptError(std::string("log entry does not parse: ") + e.what());
    }
    try {
        LogEntry entry;
        entry.tick = j.at("tick").get<Tick>();
        entry.session = j.at("session").get<std::string>();
        entry.operation_name = j.at("operation_name").get<std::string>();
        entry.input = j.at("input");
        const Json& outcome = j.at("outcome");
        const std::string status = outcome.at("status").get<std::string>();
        if (status == "ok") {
            entry.ok = true;
        } else if (status == "error") {
            entry.ok = false;
            entry.defect_type = outcome.at("defect_type").get<std::string>();
            if (entry.defect_type.empty())
                throw LogCorruptError("error entry with empty defect_type");
            entry.context =
                outcome.at("context").get<std::map<std::string, std::string>>();
        } else {
            throw LogCorruptError("unknown outcome status '" + status + "'");
        }
        return entry;
    } catch (const Json::exception& e) {
        throw LogCorruptError(std::string("log entry malformed: ") + e.what());
    }
}

}  // namespace triad
