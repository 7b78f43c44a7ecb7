#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace eitmem {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
/// Digest of a file's contents. Throws InputError if unreadable.
std::string file_sha256(const std::filesystem::path& path);

/// UTC wall-clock time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Reads a whole file. Throws InputError if unreadable.
std::string read_file(const std::filesystem::path& path);
/// Writes bytes exactly, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view bytes);

struct OutputRecord {
  std::string file;  // relative to the output directory
  std::string sha256;
};

/// Assembles the run manifest. `request` is the fully resolved parameter
/// set; replaying it reproduces every output.
nlohmann::json make_manifest(const nlohmann::json& request, const nlohmann::json& presets,
                             const nlohmann::json& inputs,
                             const std::vector<OutputRecord>& outputs);

/// sha256 of the request's canonical dump; every sidecar carries it.
std::string request_fingerprint(const nlohmann::json& request);

}  // namespace eitmem
