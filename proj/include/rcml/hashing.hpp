#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace rcml {

/// Lowercase hex SHA-1 of raw bytes.
std::string sha1_hex(std::string_view bytes);

/// Git-style blob hash: sha1("blob <size>\0" + content).
std::string git_blob_hash(std::string_view content);
std::string git_blob_hash_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace rcml
