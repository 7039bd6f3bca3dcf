#pragma once

#include <stdexcept>
#include <string>

namespace slcnn {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer shape disagreements. Messages name both offending shapes.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Bad argument values: targets outside {0,1}, unparsable scale names, etc.
class ValueError : public Error {
public:
    explicit ValueError(const std::string& msg) : Error(msg) {}
};

// Config/manifest validation failures. The CLI maps these to exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Filesystem trouble (cannot open/read/write).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// WAV decode failures, with the category kept machine-readable.
class WavError : public Error {
public:
    enum class Kind {
        not_riff,
        missing_chunk,
        unsupported_codec,
        unsupported_depth,
        unsupported_channels,
        truncated,
    };
    WavError(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
    Kind kind;
};

// Checkpoint container failures. Truncation, bad magic and version
// mismatch are distinct kinds so callers can tell them apart.
class CheckpointError : public Error {
public:
    enum class Kind {
        bad_magic,
        bad_version,
        truncated,
        malformed,
    };
    CheckpointError(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
    Kind kind;
};

// ROC-AUC over a single-class label set is undefined; macro averaging
// catches this and skips the tag.
class UndefinedAucError : public Error {
public:
    explicit UndefinedAucError(const std::string& msg) : Error(msg) {}
};

} // namespace slcnn
