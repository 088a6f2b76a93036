#pragma once

#include <stdexcept>
#include <string>

namespace videotree {

// One exception type per contract error so callers (and the CLI exit-code
// mapping) can tell them apart without parsing messages.

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : std::runtime_error {
    explicit DimensionMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidK : std::runtime_error {
    explicit InvalidK(const std::string& msg) : std::runtime_error(msg) {}
};

struct TooLarge : std::runtime_error {
    explicit TooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyCluster : std::runtime_error {
    explicit EmptyCluster(const std::string& msg) : std::runtime_error(msg) {}
};

struct MismatchedFrameCount : std::runtime_error {
    explicit MismatchedFrameCount(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidDepth : std::runtime_error {
    explicit InvalidDepth(const std::string& msg) : std::runtime_error(msg) {}
};

struct TransportError : std::runtime_error {
    explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BackendRefusal : std::runtime_error {
    explicit BackendRefusal(const std::string& msg) : std::runtime_error(msg) {}
};

struct ScriptExhausted : std::runtime_error {
    explicit ScriptExhausted(const std::string& msg) : std::runtime_error(msg) {}
};

struct CaptionMissing : std::runtime_error {
    explicit CaptionMissing(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseFailure : std::runtime_error {
    explicit ParseFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct LengthMismatch : std::runtime_error {
    explicit LengthMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyDataset : std::runtime_error {
    explicit EmptyDataset(const std::string& msg) : std::runtime_error(msg) {}
};

struct DuplicateUid : std::runtime_error {
    explicit DuplicateUid(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyInput : std::runtime_error {
    explicit EmptyInput(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace videotree
