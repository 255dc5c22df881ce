#pragma once

#include <stdexcept>
#include <string>

namespace dive {

// Root of every error raised by the engine. The CLI maps subclasses to exit
// codes: validation-like errors exit 1, pipeline/runtime errors exit 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class IllegalTransitionError : public Error {
public:
    using Error::Error;
};

class ConfigurationError : public Error {
public:
    using Error::Error;
};

// Live backend gave up after retries. status is the last HTTP status seen,
// or 0 when the failure was at the transport level.
class UpstreamError : public Error {
public:
    UpstreamError(const std::string& what, int status) : Error(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

// Scripted backend saw a request no rule matches.
class UnmatchedRequestError : public Error {
public:
    using Error::Error;
};

class ExternalServiceError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

// A tool invocation failed; carries the tool identifier.
class ToolError : public Error {
public:
    ToolError(std::string tool_id, const std::string& what)
        : Error(tool_id + ": " + what), tool_id_(std::move(tool_id)) {}
    const std::string& tool_id() const noexcept { return tool_id_; }

private:
    std::string tool_id_;
};

// A pipeline step produced unusable output (empty reply, nothing parseable).
class StepFailure : public Error {
public:
    StepFailure(std::string step, const std::string& what)
        : Error(step + ": " + what), step_(std::move(step)) {}
    const std::string& step() const noexcept { return step_; }

private:
    std::string step_;
};

// Aborted pipeline run. trace_path points at the partial trace, if one was written.
class PipelineError : public Error {
public:
    PipelineError(const std::string& what, std::string trace_path)
        : Error(what), trace_path_(std::move(trace_path)) {}
    const std::string& trace_path() const noexcept { return trace_path_; }

private:
    std::string trace_path_;
};

} // namespace dive
