#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace sparselab {

// git describe of the tree this binary was built from.
std::string git_describe();

void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// RFC-4180: CRLF records, fields quoted when they contain comma, quote or
// newline. Numbers are printed with enough digits to round-trip.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> row);
  void write(const std::filesystem::path& path) const;

  static std::string num(double v);
  static std::string num(std::size_t v);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// JSON sidecar carrying the full run configuration and build id; written
// next to every command's outputs.
void write_provenance(const std::filesystem::path& out_dir, const nlohmann::json& run_config,
                      const std::string& command);

}  // namespace sparselab
