#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace forge {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input line. `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    ValidationError(std::string sample_id, std::vector<std::string> violations);
    const std::string& sample_id() const noexcept { return sample_id_; }
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::string sample_id_;
    std::vector<std::string> violations_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Department labels that could not be resolved against the taxonomy.
class IngestError : public Error {
public:
    IngestError(const std::string& what, std::vector<std::string> labels);
    const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    std::vector<std::string> labels_;
};

/// A stratum holds fewer items than the plan asks for.
class ShortfallError : public Error {
public:
    ShortfallError(std::string stratum, std::size_t requested, std::size_t available);
    const std::string& stratum() const noexcept { return stratum_; }
    std::size_t deficit() const noexcept { return requested_ - available_; }

private:
    std::string stratum_;
    std::size_t requested_;
    std::size_t available_;
};

/// Ids that appear on both sides of a train/eval or stage-1/stage-2 boundary.
class LeakError : public Error {
public:
    LeakError(const std::string& what, std::vector<std::string> ids);
    const std::vector<std::string>& ids() const noexcept { return ids_; }

private:
    std::vector<std::string> ids_;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

} // namespace forge
