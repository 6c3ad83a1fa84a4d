#include "sparselab/report.hpp"

#include <cstdio>

#include "sparselab/errors.hpp"

#ifndef SPARSELAB_GIT_DESCRIBE
#define SPARSELAB_GIT_DESCRIBE "unknown"
#endif

namespace sparselab {

std::string git_describe() { return SPARSELAB_GIT_DESCRIBE; }

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
  if (f == nullptr) throw DataError("cannot write " + path.string());
  const std::size_t written = std::fwrite(text.data(), 1, text.size(), f);
  std::fclose(f);
  if (written != text.size()) throw DataError("short write to " + path.string());
  std::filesystem::rename(tmp, path);
}

void CsvWriter::add_row(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw ShapeError("CsvWriter: column count mismatch");
  rows_.push_back(std::move(row));
}

namespace {

std::string escape_field(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

void append_record(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i != 0) out += ',';
    out += escape_field(fields[i]);
  }
  out += "\r\n";
}

}  // namespace

void CsvWriter::write(const std::filesystem::path& path) const {
  std::string text;
  append_record(text, header_);
  for (const auto& row : rows_) append_record(text, row);
  write_text_atomic(path, text);
}

std::string CsvWriter::num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string CsvWriter::num(std::size_t v) { return std::to_string(v); }

void write_provenance(const std::filesystem::path& out_dir, const nlohmann::json& run_config,
                      const std::string& command) {
  nlohmann::json j;
  j["command"] = command;
  j["git_describe"] = git_describe();
  j["run_config"] = run_config;
  write_text_atomic(out_dir / "provenance.json", j.dump(2) + "\n");
}

}  // namespace sparselab
