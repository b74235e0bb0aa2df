#pragma once

#include <stdexcept>
#include <string>

namespace qneat {

// Base class for all library errors so callers can catch qneat failures
// separately from std exceptions.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// The enabled-connection digraph contains a cycle.
class CycleError : public Error {
public:
    explicit CycleError(const std::string& msg) : Error(msg) {}
};

// An input vector, code list, or matrix has the wrong length.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// A file could not be parsed; the message names the offending row/column.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// A parsed value lies outside its permitted range.
class RangeError : public Error {
public:
    explicit RangeError(const std::string& msg) : Error(msg) {}
};

// Not enough records of some class/category to satisfy a sampling request.
class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& msg) : Error(msg) {}
};

// Fold count outside the supported range.
class InvalidK : public Error {
public:
    explicit InvalidK(const std::string& msg) : Error(msg) {}
};

// A stored model carries an unsupported format version.
class VersionError : public Error {
public:
    explicit VersionError(const std::string& msg) : Error(msg) {}
};

// A stored model fails its checksum or cannot be decoded.
class CorruptionError : public Error {
public:
    explicit CorruptionError(const std::string& msg) : Error(msg) {}
};

// Data does not match the shape a model expects.
class SchemaMismatch : public Error {
public:
    explicit SchemaMismatch(const std::string& msg) : Error(msg) {}
};

} // namespace qneat
