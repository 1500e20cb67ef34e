#pragma once

#include <string>

namespace capepde {

/// Hex-encoded SHA-256 of a byte string / of a file's contents.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

}  // namespace capepde
