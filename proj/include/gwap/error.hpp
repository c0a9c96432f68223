#pragma once

#include <stdexcept>
#include <string>

namespace gwap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Inputs are individually valid but inconsistent with each other
/// (e.g. a tagged task image nobody trusted has annotated).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// A tag id is not part of the vocabulary it was looked up in.
class UnknownTagError : public Error {
public:
    explicit UnknownTagError(std::string tag)
        : Error("unknown tag '" + tag + "'; route it through new-tag handling first"),
          tag_(std::move(tag)) {}

    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

/// Power iteration hit its iteration cap before reaching the tolerance.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(int iterations, double residual)
        : Error("power iteration did not converge after " + std::to_string(iterations) +
                " iterations (residual " + std::to_string(residual) + ")"),
          iterations_(iterations), residual_(residual) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

/// A JSON document does not match the PlayerDB/ResultDB/manifest layout.
/// `path()` names the offending field, e.g. "tasks[0].ROIs[0].tags".
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// A sampling pool cannot supply the requested number of images.
class PoolExhaustedError : public Error {
public:
    PoolExhaustedError(std::string pool, std::size_t available, std::size_t required)
        : Error(pool + " pool has " + std::to_string(available) + " images, task needs " +
                std::to_string(required)),
          pool_(std::move(pool)) {}

    const std::string& pool() const noexcept { return pool_; }

private:
    std::string pool_;
};

} // namespace gwap
