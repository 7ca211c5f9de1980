#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qdiff {

enum class ErrorKind {
    domain,           // argument outside the mathematical domain
    divergent_moment, // requested moment does not exist for this q
    numeric,          // an iterative evaluation failed to converge
    configuration,    // invalid user settings or grids
    lookup,           // key (timestamp, column, lag) not found
    data,             // malformed or empty input data
    estimation,       // a fit or estimator could not produce a result
    segmentation      // zone detection failed
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::domain: return "domain error";
    case ErrorKind::divergent_moment: return "divergent moment";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::lookup: return "lookup error";
    case ErrorKind::data: return "data error";
    case ErrorKind::estimation: return "estimation error";
    case ErrorKind::segmentation: return "segmentation error";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind),
          message_(message) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    /// The message without the kind prefix.
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace qdiff
