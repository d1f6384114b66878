#include "output.hpp"

#include <cstdio>
#include <fstream>

#include "chisep/errors.hpp"

namespace chisep::cli {

void prepare_out_dir(const std::filesystem::path& dir, bool must_exist) {
  if (std::filesystem::is_directory(dir)) return;
  if (must_exist) throw IoError("output directory does not exist", dir.string());
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory (" + ec.message() + ")", dir.string());
}

void echo_config(const std::filesystem::path& dir, const RunConfig& cfg, const std::string& raw_text) {
  write_json(dir / "run_config.json", cfg.to_json());
  if (!raw_text.empty()) write_text(dir / "config.input.json", raw_text);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  out << text;
  if (!out) throw IoError("write failed", path.string());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace chisep::cli
