#pragma once

#include <stdexcept>
#include <string>

namespace pcdm {

/// Filesystem-level failure: missing file, unwritable path, short write.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file content. Messages carry a line number or byte offset.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pcdm
