#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace smmkg {

// Lowercases ASCII, trims, and collapses whitespace runs to single spaces.
// Bytes outside ASCII pass through unchanged (labels are expected in NFC).
std::string normalize_label(std::string_view text);

std::vector<std::string> split_any(std::string_view text, std::string_view separators);

// Strips leading list markers ("-", "*", "1.", "2)") and surrounding space.
std::string strip_list_marker(std::string_view item);

uint64_t fnv1a64(std::string_view data);

// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

// Hex SHA-256 of a file's contents. Throws ErrorKind::io when unreadable.
std::string sha256_file(const std::filesystem::path& path);

// Content-derived 128-bit identifier, rendered as 32 hex chars.
std::string stable_id(std::string_view kind, std::string_view label,
                      std::string_view provenance = {});

std::string read_text_file(const std::filesystem::path& path);

// read_text_file with trailing whitespace stripped (template files).
std::string read_text_file_trimmed(const std::filesystem::path& path);

// Writes via a temp file in the same directory followed by an atomic rename.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace smmkg
