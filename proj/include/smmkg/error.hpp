#pragma once

#include <stdexcept>
#include <string>

namespace smmkg {

// Error taxonomy shared by the whole engine. The CLI maps kinds to exit codes.
enum class ErrorKind {
    config,        // bad or missing configuration, fixture miss
    precondition,  // caller violated an operation precondition
    contract,      // dimension/shape mismatch between values
    transport,     // remote endpoint unreachable or misbehaving
    integrity,     // dangling reference inside a graph
    mutation,      // write attempted on a frozen graph
    lookup,        // unknown id
    corruption,    // checksum mismatch on load
    version,       // unknown on-disk schema version
    template_slot, // prompt template missing a slot
    retrieval,     // retrieval over an empty graph
    numeric,       // non-finite value produced
    io,            // file missing or unreadable
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::contract: return "contract";
        case ErrorKind::transport: return "transport";
        case ErrorKind::integrity: return "integrity";
        case ErrorKind::mutation: return "mutation";
        case ErrorKind::lookup: return "lookup";
        case ErrorKind::corruption: return "corruption";
        case ErrorKind::version: return "version";
        case ErrorKind::template_slot: return "template";
        case ErrorKind::retrieval: return "retrieval";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace smmkg
