#include "report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "error.hpp"

namespace elicit {

namespace {

std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "unavailable";
        else if constexpr (std::is_same_v<T, double>) return format_number(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
        else return v;
      },
      c);
}

nlohmann::ordered_json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> nlohmann::ordered_json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "unavailable";
        else return v;
      },
      c);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

// Display width in code points, so markers like "✓" align.
std::size_t width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
  return w;
}

std::string render_json(const Report& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metadata) meta[k] = v;
  j["metadata"] = meta;
  j["tables"] = nlohmann::ordered_json::array();
  for (const auto& t : r.tables) {
    nlohmann::ordered_json jt;
    jt["name"] = t.name;
    jt["columns"] = nlohmann::ordered_json::array();
    for (const auto& c : t.columns)
      jt["columns"].push_back({{"name", c.name}, {"type", to_string(c.type)}});
    jt["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
      auto jr = nlohmann::ordered_json::array();
      for (const auto& c : row) jr.push_back(cell_json(c));
      jt["rows"].push_back(jr);
    }
    j["tables"].push_back(jt);
  }
  j["diagnostics"] = nlohmann::ordered_json::array();
  for (const auto& d : r.diagnostics)
    j["diagnostics"].push_back({{"flag", d.flag}, {"detail", d.detail}});
  return j.dump(2) + "\n";
}

std::string render_text(const Report& r) {
  std::ostringstream os;
  os << "schema_version: " << kSchemaVersion << "\n";
  for (const auto& [k, v] : r.metadata) os << k << ": " << v << "\n";
  for (const auto& t : r.tables) {
    os << "\n[" << t.name << "]\n";
    std::vector<std::vector<std::string>> cells;
    std::vector<std::size_t> w(t.columns.size());
    std::vector<std::string> head;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      head.push_back(t.columns[c].name);
      w[c] = width(head.back());
    }
    for (const auto& row : t.rows) {
      std::vector<std::string> line;
      for (std::size_t c = 0; c < row.size(); ++c) {
        line.push_back(cell_text(row[c]));
        w[c] = std::max(w[c], width(line.back()));
      }
      cells.push_back(std::move(line));
    }
    auto emit = [&](const std::vector<std::string>& line) {
      for (std::size_t c = 0; c < line.size(); ++c) {
        const bool right = t.columns[c].type != ColumnType::String;
        const std::string pad(w[c] - width(line[c]), ' ');
        os << (c ? "  " : "") << (right ? pad + line[c] : line[c] + pad);
      }
      os << "\n";
    };
    emit(head);
    for (const auto& line : cells) emit(line);
  }
  if (!r.diagnostics.empty()) {
    os << "\n[diagnostics]\n";
    for (const auto& d : r.diagnostics) os << d.flag << ": " << d.detail << "\n";
  }
  return os.str();
}

std::string render_csv(const Report& r) {
  std::ostringstream os;
  os << "# schema_version," << kSchemaVersion << "\n";
  for (const auto& [k, v] : r.metadata) os << "# " << k << "," << csv_escape(v) << "\n";
  for (const auto& t : r.tables) {
    os << "\n# table," << t.name << "\n";
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      os << (c ? "," : "") << csv_escape(t.columns[c].name);
    os << "\n";
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_escape(cell_text(row[c]));
      os << "\n";
    }
  }
  for (const auto& d : r.diagnostics) os << "\n# diagnostic," << d.flag << "," << csv_escape(d.detail);
  if (!r.diagnostics.empty()) os << "\n";
  return os.str();
}

}  // namespace

const char* to_string(ColumnType t) noexcept {
  switch (t) {
    case ColumnType::Number: return "number";
    case ColumnType::Integer: return "integer";
    case ColumnType::Boolean: return "boolean";
    case ColumnType::String: return "string";
  }
  return "string";
}

Table& Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size())
    fail(ErrorKind::Domain, "table " + name + ": row has " + std::to_string(row.size()) +
                                " cells, expected " + std::to_string(columns.size()));
  rows.push_back(std::move(row));
  return *this;
}

std::size_t Table::column(const std::string& col) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == col) return i;
  fail(ErrorKind::Domain, "table " + name + " has no column " + col);
}

const Table& Report::table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return t;
  fail(ErrorKind::Domain, "report has no table " + name);
}

void Report::flag(std::string name, std::string detail) {
  diagnostics.push_back({std::move(name), std::move(detail)});
}

Format parse_format(const std::string& text) {
  if (text == "json") return Format::Json;
  if (text == "text") return Format::Text;
  if (text == "csv") return Format::Csv;
  fail(ErrorKind::Config, "format must be json, text or csv, got '" + text + "'");
}

Cell number(double v) {
  if (!std::isfinite(v)) return std::monostate{};
  return v;
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return "unavailable";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  std::string s = buf;
  if (s == "-0") s = "0";
  return s;
}

std::string render(const Report& report, Format format) {
  switch (format) {
    case Format::Json: return render_json(report);
    case Format::Text: return render_text(report);
    case Format::Csv: return render_csv(report);
  }
  return {};
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) fail(ErrorKind::Io, "write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot move output into place at " + path);
  }
}

}  // namespace elicit
