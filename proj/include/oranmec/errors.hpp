#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace oranmec {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    // Binary inputs have no line numbers.
    explicit ParseError(const std::string& what) : Error(what), line_(0) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class RoutingError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class DemandCapError : public Error {
public:
    using Error::Error;
};

class EpisodeEnded : public Error {
public:
    using Error::Error;
};

class OracleTooLarge : public Error {
public:
    OracleTooLarge(std::uint64_t cardinality, std::uint64_t limit)
        : Error("joint action space has " + std::to_string(cardinality) +
                " actions, above the limit of " + std::to_string(limit)),
          cardinality_(cardinality) {}
    std::uint64_t cardinality() const noexcept { return cardinality_; }

private:
    std::uint64_t cardinality_;
};

} // namespace oranmec
