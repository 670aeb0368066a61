#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dnet {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible or invalid tensor shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A hyperparameter outside its valid range.
class ParamError : public Error {
public:
    using Error::Error;
};

// Invalid training / evaluation configuration (e.g. single-class data).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite loss during training.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t epoch, std::size_t batch)
        : Error(what), epoch_(epoch), batch_(batch) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

// Malformed binary model file; carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Dataset, image or text-artifact loading failure.
class LoadError : public Error {
public:
    using Error::Error;
};

// Filesystem failure; the message always names the path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace dnet
