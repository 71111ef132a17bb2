#pragma once

#include <stdexcept>
#include <string>

namespace gal {

/// Base of every error raised by the engine and its modules.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class DegenerateVectorError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

class EmptyBatchError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

/// The review server could not bind its listening socket.
class BindError : public Error {
public:
    using Error::Error;
};

/// Raised when a run directory cannot be loaded; `file()` names the culprit.
class PersistenceError : public Error {
public:
    PersistenceError(std::string file, const std::string& what)
        : Error(file + ": " + what), file_(std::move(file)) {}

    const std::string& file() const noexcept { return file_; }

private:
    std::string file_;
};

/// A backend call failed. Carries enough context for the caller to retry.
class BackendError : public Error {
public:
    BackendError(const std::string& what, int status = 0, int attempts = 1,
                 std::string body_excerpt = {})
        : Error(what),
          status_(status),
          attempts_(attempts),
          body_excerpt_(std::move(body_excerpt)) {}

    int status() const noexcept { return status_; }
    int attempts() const noexcept { return attempts_; }
    const std::string& body_excerpt() const noexcept { return body_excerpt_; }

private:
    int status_;
    int attempts_;
    std::string body_excerpt_;
};

}  // namespace gal
