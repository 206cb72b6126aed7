#pragma once

#include <string>
#include <vector>

#include "le_core.hpp"
#include "mrt_core.hpp"
#include "mrt_mle.hpp"

namespace elicit {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // row i is data row i + 1
};

CsvTable parse_csv(const std::string& text, const std::string& origin);
CsvTable read_csv(const std::string& path);

struct LeData {
  LeSample sample;
  std::vector<std::string> z_names;
  bool has_direct = false;
  std::vector<int> direct;  // one per control record, in sample order
};

LeData parse_le_csv(const std::string& text, int j_count, const std::string& origin = "input");
LeData load_le_csv(const std::string& path, int j_count);

struct MrtRow {
  int x1 = 0, x2 = 0, x3 = 0;
  std::vector<int> z;
};

struct MrtDiscreteData {
  std::vector<std::string> z_names;
  std::vector<MrtRow> rows;
};

enum class MrtMode { Discrete, Continuous };
MrtMode parse_mrt_mode(const std::string& text);

MrtDiscreteData parse_mrt_discrete_csv(const std::string& text, const std::string& origin = "input");
MrtDiscreteData load_mrt_discrete_csv(const std::string& path);

struct MrtContinuousData {
  std::vector<std::string> z_names;
  MrtContinuousSample sample;
};

MrtContinuousData parse_mrt_continuous_csv(const std::string& text,
                                           const std::string& origin = "input");
MrtContinuousData load_mrt_continuous_csv(const std::string& path);

/// Counts of the rows selected by `index` (all rows when empty).
MrtJoint joint_of(const std::vector<MrtRow>& rows, const std::vector<std::size_t>& index,
                  int z_cell = 0);

/// Rows grouped by the full covariate profile, ordered by profile.
std::vector<std::pair<std::vector<int>, MrtJoint>> joints_by_profile(
    const std::vector<MrtRow>& rows);

}  // namespace elicit
