#pragma once

#include <string>

namespace dismax {

// Whole-file atomic write: temp file beside the target, then rename.
void write_file_atomic(const std::string& path, const std::string& contents);

// Reads a whole file; throws data_error when unreadable.
std::string read_file(const std::string& path);

}  // namespace dismax
