#pragma once

#include <map>
#include <string>

#include "triad/core.hpp"

namespace triad {

struct LogCorruptError : Error { using Error::Error; };

/// One recorded user action. Error entries carry a non-empty defect_type.
struct LogEntry {
    Tick tick{0};
    std::string session;
    std::string operation_name;
    Value input = Value::object();
    bool ok{true};
    std::string defect_type;
    std::map<std::string, std::string> context;

    bool operator==(const LogEntry&) const = default;
};

/// Canonical single-line encoding (no trailing newline).
std::string log_line(const LogEntry& entry);

/// Throws LogCorruptError when the line does not parse as an entry.
LogEntry log_entry_from_line(const std::string& line);

}  // namespace triad
