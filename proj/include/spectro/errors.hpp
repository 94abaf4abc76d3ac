#pragma once

#include <stdexcept>
#include <string>

namespace spectro {

// File does not conform to an on-disk format (bad magic, version, header).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

// Header-declared sizes disagree with the payload actually present.
struct TruncationError : std::runtime_error {
    explicit TruncationError(const std::string& msg) : std::runtime_error("truncation error: " + msg) {}
};

// Content is structurally valid but semantically bad (NaN entries, bad probabilities).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

// A record is missing a required field or has the wrong type.
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error("schema error: " + msg) {}
};

// Two inputs that must align (row counts, node ids) do not.
struct PairingError : std::runtime_error {
    explicit PairingError(const std::string& msg) : std::runtime_error("pairing error: " + msg) {}
};

// An argument is outside its documented domain.
struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& msg) : std::invalid_argument("domain error: " + msg) {}
};

// A sampler chain left the basin it was supposed to explore.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error("divergence error: " + msg) {}
};

} // namespace spectro
