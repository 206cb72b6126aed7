#include "io_csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "error.hpp"

namespace elicit {

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Load, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t\r");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

std::string at_row(std::size_t r) { return "row " + std::to_string(r + 1) + ": "; }

std::optional<long long> as_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) return std::nullopt;
  return v;
}

std::optional<double> as_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (*end != '\0' || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct Columns {
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> z;
  std::vector<std::string> z_names;

  explicit Columns(const CsvTable& t, const std::string& origin) {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      const auto& h = t.header[i];
      if (h.empty()) fail(ErrorKind::Load, origin + ": empty column name in header");
      if (!index.emplace(h, i).second) fail(ErrorKind::Load, origin + ": duplicate column " + h);
      if (h.rfind("z_", 0) == 0) {
        z.push_back(i);
        z_names.push_back(h);
      }
    }
  }

  std::size_t need(const std::string& name, const std::string& origin) const {
    const auto it = index.find(name);
    if (it == index.end()) fail(ErrorKind::Load, origin + ": missing required column " + name);
    return it->second;
  }

  std::optional<std::size_t> maybe(const std::string& name) const {
    const auto it = index.find(name);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
};

int binary_field(const std::vector<std::string>& row, std::size_t col, const std::string& name,
                 std::size_t r) {
  const auto v = as_int(row[col]);
  if (row[col].empty()) fail(ErrorKind::Load, at_row(r) + name + " is missing");
  if (!v || (*v != 0 && *v != 1)) fail(ErrorKind::Load, at_row(r) + name + " must be 0 or 1");
  return static_cast<int>(*v);
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (header) {
      if (!fields.empty() && fields[0].size() >= 3 && fields[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
        fields[0].erase(0, 3);
      t.header = std::move(fields);
      header = false;
      continue;
    }
    if (fields.size() != t.header.size())
      fail(ErrorKind::Load, origin + ": " + at_row(t.rows.size()) + "expected " +
                                std::to_string(t.header.size()) + " fields, found " +
                                std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (header) fail(ErrorKind::Load, origin + ": empty file (a header row is required)");
  if (t.rows.empty()) fail(ErrorKind::Load, origin + ": no data rows");
  return t;
}

CsvTable read_csv(const std::string& path) { return parse_csv(slurp(path), path); }

LeData parse_le_csv(const std::string& text, int j_count, const std::string& origin) {
  if (j_count < 1) fail(ErrorKind::Config, "j-count must be at least 1");
  const CsvTable t = parse_csv(text, origin);
  const Columns cols(t, origin);
  const auto cy = cols.need("y", origin), ct = cols.need("t", origin);
  const auto cx = cols.maybe("x_direct");

  LeData d;
  d.sample.j_count = j_count;
  d.z_names = cols.z_names;
  d.has_direct = cx.has_value();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    LeRecord rec;
    rec.t = binary_field(row, ct, "t", r);
    if (row[cy].empty()) fail(ErrorKind::Load, at_row(r) + "y is missing");
    const auto y = as_int(row[cy]);
    if (!y) fail(ErrorKind::Load, at_row(r) + "y is not an integer");
    if (*y < 0) fail(ErrorKind::Load, at_row(r) + "y is negative");
    if (rec.t == 0 && *y > j_count) fail(ErrorKind::Load, at_row(r) + "y exceeds J for control");
    if (rec.t == 1 && *y > j_count + 1)
      fail(ErrorKind::Load, at_row(r) + "y exceeds J+1 for treatment");
    rec.y = static_cast<int>(*y);
    for (std::size_t k = 0; k < cols.z.size(); ++k) {
      const auto& s = row[cols.z[k]];
      if (s.empty()) fail(ErrorKind::Load, at_row(r) + cols.z_names[k] + " is missing");
      const auto v = as_int(s);
      if (!v) fail(ErrorKind::Load, at_row(r) + cols.z_names[k] + " must be an integer code");
      rec.z.push_back(static_cast<int>(*v));
    }
    if (cx) {
      if (rec.t == 0) d.direct.push_back(binary_field(row, *cx, "x_direct", r));
      else if (!row[*cx].empty())
        fail(ErrorKind::Load, at_row(r) + "x_direct is only recorded for control rows");
    }
    d.sample.records.push_back(std::move(rec));
  }
  try {
    validate(d.sample);
  } catch (const Error& e) {
    fail(ErrorKind::Load, origin + ": " + e.what());
  }
  return d;
}

LeData load_le_csv(const std::string& path, int j_count) {
  return parse_le_csv(slurp(path), j_count, path);
}

MrtMode parse_mrt_mode(const std::string& text) {
  if (text == "discrete") return MrtMode::Discrete;
  if (text == "continuous") return MrtMode::Continuous;
  fail(ErrorKind::Config, "mode must be discrete or continuous, got '" + text + "'");
}

MrtDiscreteData parse_mrt_discrete_csv(const std::string& text, const std::string& origin) {
  const CsvTable t = parse_csv(text, origin);
  const Columns cols(t, origin);
  const std::size_t c1 = cols.need("x1", origin), c2 = cols.need("x2", origin),
                    c3 = cols.need("x3", origin);
  MrtDiscreteData d;
  d.z_names = cols.z_names;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    MrtRow m;
    m.x1 = binary_field(row, c1, "x1", r);
    m.x2 = binary_field(row, c2, "x2", r);
    m.x3 = binary_field(row, c3, "x3", r);
    for (std::size_t k = 0; k < cols.z.size(); ++k) {
      const auto& s = row[cols.z[k]];
      if (s.empty()) fail(ErrorKind::Load, at_row(r) + cols.z_names[k] + " is missing");
      const auto v = as_int(s);
      if (!v) {
        if (as_real(s))
          fail(ErrorKind::Load, at_row(r) + cols.z_names[k] +
                                    " is real-valued; discrete mode needs integer codes (mixed "
                                    "covariate types)");
        fail(ErrorKind::Load, at_row(r) + cols.z_names[k] + " must be an integer code");
      }
      m.z.push_back(static_cast<int>(*v));
    }
    d.rows.push_back(std::move(m));
  }
  return d;
}

MrtDiscreteData load_mrt_discrete_csv(const std::string& path) {
  return parse_mrt_discrete_csv(slurp(path), path);
}

MrtContinuousData parse_mrt_continuous_csv(const std::string& text, const std::string& origin) {
  const CsvTable t = parse_csv(text, origin);
  const Columns cols(t, origin);
  const std::size_t c1 = cols.need("x1", origin), c2 = cols.need("x2", origin),
                    c3 = cols.need("x3", origin);
  if (cols.z.empty()) fail(ErrorKind::Load, origin + ": continuous mode needs z_* columns");
  MrtContinuousData d;
  d.z_names = cols.z_names;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    MrtContinuousRecord m;
    m.x1 = binary_field(row, c1, "x1", r);
    m.x2 = binary_field(row, c2, "x2", r);
    m.x3 = binary_field(row, c3, "x3", r);
    for (std::size_t k = 0; k < cols.z.size(); ++k) {
      const auto& s = row[cols.z[k]];
      if (s.empty()) fail(ErrorKind::Load, at_row(r) + cols.z_names[k] + " is missing");
      const auto v = as_real(s);
      if (!v) fail(ErrorKind::Load, at_row(r) + cols.z_names[k] + " must be a real number");
      m.z.push_back(*v);
    }
    d.sample.records.push_back(std::move(m));
  }
  return d;
}

MrtContinuousData load_mrt_continuous_csv(const std::string& path) {
  return parse_mrt_continuous_csv(slurp(path), path);
}

MrtJoint joint_of(const std::vector<MrtRow>& rows, const std::vector<std::size_t>& index,
                  int z_cell) {
  MrtJoint j;
  j.z_cell = z_cell;
  auto add = [&](const MrtRow& r) {
    j.at(r.x1, r.x2, r.x3) += 1.0;
    j.n_cell += 1.0;
  };
  if (index.empty())
    for (const auto& r : rows) add(r);
  else
    for (auto i : index) add(rows[i]);
  return j;
}

std::vector<std::pair<std::vector<int>, MrtJoint>> joints_by_profile(
    const std::vector<MrtRow>& rows) {
  std::map<std::vector<int>, MrtJoint> cells;
  for (const auto& r : rows) {
    auto& j = cells[r.z];
    j.at(r.x1, r.x2, r.x3) += 1.0;
    j.n_cell += 1.0;
  }
  std::vector<std::pair<std::vector<int>, MrtJoint>> out;
  int k = 0;
  for (auto& [z, j] : cells) {
    j.z_cell = k++;
    out.emplace_back(z, j);
  }
  return out;
}

}  // namespace elicit
