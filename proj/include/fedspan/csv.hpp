#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fedspan::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line;  // 1-based source line of each row
};

// Reads a comma-separated file with a header line. Blank lines are skipped.
Table read(const std::string& path);
Table parse(std::istream& in);

std::vector<std::string> split(const std::string& line);
std::string trim(const std::string& s);

// Number formatting used for every emitted CSV: round-trip exact, locale free.
std::string num(double v);

}  // namespace fedspan::csv
