#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dive {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's contents. Throws ValidationError if unreadable.
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// UTC timestamp with millisecond precision, e.g. 2025-06-01T12:00:00.123Z.
std::string utc_now_iso();

} // namespace dive
