#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "run_config.hpp"

namespace chisep::cli {

// Creates `dir` (and parents) unless `must_exist`, in which case a missing
// directory is an IoError.
void prepare_out_dir(const std::filesystem::path& dir, bool must_exist);

// Writes run_config.json (effective settings) and, when a config file was
// given, its verbatim text as config.input.json.
void echo_config(const std::filesystem::path& dir, const RunConfig& cfg, const std::string& raw_text);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// Fixed, locale-independent number formatting for tables.
std::string num(double v);

}  // namespace chisep::cli
