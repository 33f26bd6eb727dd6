#pragma once

#include <stdexcept>
#include <string>

namespace gram {

// Base class for all engine errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration; the message names the offending field.
class config_error : public error {
public:
    using error::error;
};

// Numeric argument outside its documented range.
class range_error : public error {
public:
    using error::error;
};

// Non-finite or otherwise unusable numeric input.
class value_error : public error {
public:
    using error::error;
};

// Spatial dimension problem; the message names the offending layer.
class shape_error : public error {
public:
    using error::error;
};

// Operation invoked on an object in the wrong state.
class state_error : public error {
public:
    using error::error;
};

// Filesystem-level failure.
class io_error : public error {
public:
    using error::error;
};

// File exists but is not parseable.
class corrupt_file_error : public io_error {
public:
    using io_error::io_error;
};

// File parses but its structure does not match the expected schema.
class schema_error : public io_error {
public:
    using io_error::io_error;
};

// File declares an unsupported schema version.
class version_error : public io_error {
public:
    using io_error::io_error;
};

// Cost model is missing a coefficient for a requested op kind.
class model_error : public error {
public:
    using error::error;
};

// External-evaluator protocol failure. Carries the request id the session
// was working on (-1 when no request was in flight).
class protocol_error : public error {
public:
    enum class kind {
        spawn_failed,
        version_mismatch,
        id_mismatch,
        timeout,
        malformed_reply,
        process_exit,
    };

    protocol_error(kind k, long long request_id, const std::string& msg)
        : error(msg), kind_(k), request_id_(request_id) {}

    kind what_kind() const { return kind_; }
    long long request_id() const { return request_id_; }

    static const char* kind_name(kind k) {
        switch (k) {
            case kind::spawn_failed: return "spawn_failed";
            case kind::version_mismatch: return "version_mismatch";
            case kind::id_mismatch: return "id_mismatch";
            case kind::timeout: return "timeout";
            case kind::malformed_reply: return "malformed_reply";
            case kind::process_exit: return "process_exit";
        }
        return "unknown";
    }

private:
    kind kind_;
    long long request_id_;
};

}  // namespace gram
