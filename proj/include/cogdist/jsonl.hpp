#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace cogdist {

using nlohmann::json;

std::vector<json> read_jsonl(const std::filesystem::path& path);

/// One compact JSON document per line, '\n' terminated. Parent directories are
/// created. Output is byte-stable for equal inputs (nlohmann sorts object keys).
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cogdist
