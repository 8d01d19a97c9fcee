#pragma once

#include <stdexcept>
#include <string>

namespace gridflow {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// A forward or backward pass produced NaN or Inf.
class NonFiniteError : public Error {
public:
    explicit NonFiniteError(const std::string& msg) : Error(msg) {}
};

// File / container errors. Each failure mode is a distinct type so callers
// (and tests) can tell them apart.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

class BadMagicError : public IoError {
public:
    explicit BadMagicError(const std::string& msg) : IoError(msg) {}
};

class TruncatedError : public IoError {
public:
    explicit TruncatedError(const std::string& msg) : IoError(msg) {}
};

class ExtentError : public IoError {
public:
    explicit ExtentError(const std::string& msg) : IoError(msg) {}
};

// Bad run configuration (unknown key, unparsable value, missing path).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// A generator spec that cannot produce a usable city / dataset.
class DegenerateSpecError : public Error {
public:
    explicit DegenerateSpecError(const std::string& msg) : Error(msg) {}
};

// Training aborted (non-finite loss); message carries epoch and batch index.
class TrainingError : public Error {
public:
    explicit TrainingError(const std::string& msg) : Error(msg) {}
};

}  // namespace gridflow
