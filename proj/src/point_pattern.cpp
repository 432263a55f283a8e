#include "psdetect/point_pattern.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace psdetect {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_double(const std::string& s, const std::string& path,
                    int lineno) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw error(path + ": line " + std::to_string(lineno) +
                ": bad numeric value '" + s + "'");
  }
}

}  // namespace

std::vector<PointPattern> read_point_patterns_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open " + path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw error(path + ": empty file");
  ++lineno;
  bool with_marks;
  if (line == "x,y,t")
    with_marks = false;
  else if (line == "x,y,t,mark")
    with_marks = true;
  else
    throw error(path + ": line 1: expected header 'x,y,t' or 'x,y,t,mark'");

  std::map<int, PointPattern> by_time;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    const std::size_t expected = with_marks ? 4 : 3;
    if (fields.size() != expected)
      throw error(path + ": line " + std::to_string(lineno) + ": expected " +
                  std::to_string(expected) + " fields, got " +
                  std::to_string(fields.size()));
    Point p;
    p.x = parse_double(fields[0], path, lineno);
    p.y = parse_double(fields[1], path, lineno);
    const int t =
        static_cast<int>(parse_double(fields[2], path, lineno));
    if (!in_unit_square(p))
      throw error(path + ": line " + std::to_string(lineno) +
                  ": point outside the unit square");
    auto& pattern = by_time[t];
    pattern.time_index = t;
    pattern.points.push_back(p);
    if (with_marks) {
      if (!pattern.marks) pattern.marks.emplace();
      pattern.marks->push_back(parse_double(fields[3], path, lineno));
    }
  }
  std::vector<PointPattern> patterns;
  patterns.reserve(by_time.size());
  for (auto& [t, pattern] : by_time) patterns.push_back(std::move(pattern));
  return patterns;
}

void write_point_patterns_csv(const std::string& path,
                              const std::vector<PointPattern>& patterns) {
  std::ofstream out(path);
  if (!out) throw error("cannot open " + path + " for writing");
  bool with_marks = false;
  for (const auto& p : patterns)
    if (p.marks) with_marks = true;
  out << (with_marks ? "x,y,t,mark\n" : "x,y,t\n");
  char line[192];
  for (const auto& pattern : patterns) {
    for (std::size_t i = 0; i < pattern.points.size(); ++i) {
      if (with_marks) {
        const double mark = pattern.marks ? (*pattern.marks)[i] : 0.0;
        std::snprintf(line, sizeof line, "%.17g,%.17g,%d,%.17g\n",
                      pattern.points[i].x, pattern.points[i].y,
                      pattern.time_index, mark);
      } else {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%d\n",
                      pattern.points[i].x, pattern.points[i].y,
                      pattern.time_index);
      }
      out << line;
    }
  }
  if (!out) throw error("write to " + path + " failed");
}

}  // namespace psdetect
