#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace threatbench {

// Base of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside an operation's domain (empty lists, invalid probabilities, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Prompt template with a missing or repeated task slot.
class TemplateError : public Error {
public:
    using Error::Error;
};

// Sampling parameters violating their invariants.
class ParameterError : public Error {
public:
    using Error::Error;
};

// A score that has no value for the given input (empty text, no tokens).
class UndefinedScore : public Error {
public:
    using Error::Error;
};

// Input file could not be read or a row could not be parsed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Imported row lacks a required canonical field.
class SchemaError : public ParseError {
public:
    SchemaError(std::string field, std::size_t line)
        : ParseError("missing required field '" + field + "'", line), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Configuration key missing or pointing at something unusable.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& why)
        : Error("config field '" + field + "': " + why), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// A pipeline stage failed; wraps the underlying cause.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause)
        : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace threatbench
