#include "tiergraph/targets.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include "tiergraph/sdf.hpp"

namespace tiergraph {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t p = line.find(delim, start);
    if (p == std::string::npos) {
      out.push_back(strip(line.substr(start)));
      break;
    }
    out.push_back(strip(line.substr(start, p - start)));
    start = p + 1;
  }
  return out;
}

}  // namespace

const std::array<double, kTargetCount>& TargetTable::row(const std::string& key) const {
  auto it = rows.find(key);
  if (it == rows.end()) throw TargetError("no target row for key '" + key + "'");
  return it->second;
}

int target_index(const std::string& column) {
  const std::string c = lower(column);
  for (int i = 0; i < kTargetCount; ++i)
    if (c == kTargetColumns[i]) return i;
  return -1;
}

TargetTable load_targets(const std::string& path, TargetKeying keying) {
  std::ifstream in(path);
  if (!in.is_open()) throw IoError("cannot open '" + path + "'");

  std::string header;
  if (!std::getline(in, header)) throw TargetError("empty target table");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';

  const auto cols = split(header, delim);
  int key_col = -1;
  std::array<int, kTargetCount> target_col;
  target_col.fill(-1);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const std::string c = lower(cols[i]);
    if (c == "key" || c == "cid" || c == "id" || c == "index") {
      key_col = static_cast<int>(i);
      continue;
    }
    const int t = target_index(c);
    if (t >= 0) target_col[t] = static_cast<int>(i);
  }
  if (key_col < 0) throw MissingColumn("no key column in header");
  for (int t = 0; t < kTargetCount; ++t)
    if (target_col[t] < 0)
      throw MissingColumn(std::string("missing target column '") + kTargetColumns[t] + "'");

  TargetTable table;
  table.keying = keying;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (strip(line).empty()) continue;
    const auto fields = split(line, delim);
    if (fields.size() != cols.size())
      throw TargetError("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(cols.size()) + " fields, got " +
                        std::to_string(fields.size()));
    std::array<double, kTargetCount> vals{};
    for (int t = 0; t < kTargetCount; ++t) {
      const std::string& f = fields[target_col[t]];
      double v = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || p != f.data() + f.size())
        throw NonNumericValue("line " + std::to_string(lineno) + ", column '" +
                              kTargetColumns[t] + "': '" + f + "'");
      vals[t] = v;
    }
    const std::string& key = fields[key_col];
    if (!table.rows.emplace(key, vals).second)
      throw DuplicateKey("duplicate key '" + key + "'");
    table.keys.push_back(key);
  }
  return table;
}

}  // namespace tiergraph
