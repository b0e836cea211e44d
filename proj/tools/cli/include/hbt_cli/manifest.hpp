#pragma once

#include <string>

namespace hbt::cli {

std::string sha256_hex(const std::string& bytes);

// Path of the manifest written next to an output file.
std::string manifest_path(const std::string& output_path);

const char* code_version();

}  // namespace hbt::cli
