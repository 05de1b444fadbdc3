#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace stratwave {

// Lossless decimal rendering with 17 significant digits.
std::string fmt17(double v);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

} // namespace stratwave
