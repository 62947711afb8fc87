#pragma once

#include <stdexcept>
#include <string>

namespace mcmix {

// Failure categories map one-to-one onto the CLI exit codes.
enum class ErrorKind { usage = 1, io = 2, data = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return {ErrorKind::usage, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::io, what}; }
inline Error data_error(const std::string& what) { return {ErrorKind::data, what}; }

} // namespace mcmix
