#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace elicit {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

// monostate renders as "unavailable".
using Cell = std::variant<std::monostate, double, std::int64_t, bool, std::string>;

enum class ColumnType { Number, Integer, Boolean, String };
const char* to_string(ColumnType t) noexcept;

struct Column {
  std::string name;
  ColumnType type = ColumnType::Number;
};

struct Table {
  std::string name;
  std::vector<Column> columns;
  std::vector<std::vector<Cell>> rows;

  Table& add_row(std::vector<Cell> row);
  std::size_t column(const std::string& name) const;
};

struct Diagnostic {
  std::string flag;  // clipped, ridge-regularized, dropped-replicates, ...
  std::string detail;
};

struct Report {
  std::map<std::string, std::string> metadata;
  std::vector<Table> tables;
  std::vector<Diagnostic> diagnostics;

  const Table& table(const std::string& name) const;
  void flag(std::string name, std::string detail);
};

enum class Format { Json, Text, Csv };
Format parse_format(const std::string& text);

/// Non-finite doubles are written as "unavailable".
Cell number(double v);

std::string format_number(double v);  // 6 significant digits
std::string render(const Report& report, Format format);

void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace elicit
