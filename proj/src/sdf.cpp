#include "tiergraph/sdf.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace tiergraph {
namespace {

std::string_view rstrip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::string_view strip(std::string_view s) {
  s = rstrip(s);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  return s;
}

std::string_view field(std::string_view line, std::size_t pos, std::size_t len) {
  if (pos >= line.size()) return {};
  return line.substr(pos, std::min(len, line.size() - pos));
}

std::optional<int> parse_int(std::string_view s) {
  s = strip(s);
  if (s.empty()) return std::nullopt;
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  s = strip(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// Legacy atom-block charge column codes (CTFile).
int legacy_charge(int code) {
  switch (code) {
    case 1: return 3;
    case 2: return 2;
    case 3: return 1;
    case 5: return -1;
    case 6: return -2;
    case 7: return -3;
    default: return 0;  // 0 = none, 4 = doublet radical
  }
}

}  // namespace

std::optional<std::string> Molecule::prop(std::string_view name) const {
  auto it = props.find(std::string(name));
  if (it == props.end()) return std::nullopt;
  return it->second;
}

std::string Molecule::cid_or(std::string_view fallback) const {
  if (auto v = prop("PUBCHEM_COMPOUND_CID")) return *v;
  if (auto v = prop("PubChem CID")) return *v;
  return std::string(fallback);
}

Molecule parse_sdf_record(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() < 4) throw TruncatedBlock("record shorter than header + counts line");

  Molecule m;
  m.title = std::string(rstrip(lines[0]));

  const std::string_view counts = lines[3];
  const auto natoms = parse_int(field(counts, 0, 3));
  const auto nbonds = parse_int(field(counts, 3, 3));
  if (!natoms || !nbonds || *natoms < 0 || *nbonds < 0)
    throw MalformedCountsLine("bad counts line: '" + std::string(counts) + "'");

  const auto ctoks = tokens(counts);
  const std::string_view version = ctoks.empty() ? std::string_view{} : ctoks.back();
  if (version != "V2000")
    throw UnsupportedVersion("expected V2000, got '" + std::string(version) + "'");

  std::size_t ln = 4;
  m.atoms.reserve(*natoms);
  for (int i = 0; i < *natoms; ++i, ++ln) {
    if (ln >= lines.size()) throw TruncatedBlock("atom block ends early");
    const std::string_view line = lines[ln];
    Atom a;
    if (line.size() >= 34) {
      const auto x = parse_double(field(line, 0, 10));
      const auto y = parse_double(field(line, 10, 10));
      const auto z = parse_double(field(line, 20, 10));
      if (!x || !y || !z)
        throw SdfParseError("bad atom coordinates: '" + std::string(line) + "'");
      a.position = {*x, *y, *z};
      a.element = std::string(strip(field(line, 31, 3)));
      if (auto code = parse_int(field(line, 36, 3)))
        a.formal_charge = legacy_charge(*code);
    } else {
      const auto t = tokens(line);
      if (t.size() < 4) throw TruncatedBlock("short atom line");
      const auto x = parse_double(t[0]), y = parse_double(t[1]), z = parse_double(t[2]);
      if (!x || !y || !z)
        throw SdfParseError("bad atom coordinates: '" + std::string(line) + "'");
      a.position = {*x, *y, *z};
      a.element = std::string(t[3]);
    }
    if (a.element.empty())
      throw SdfParseError("missing element symbol on atom line " + std::to_string(i + 1));
    m.atoms.push_back(std::move(a));
  }

  std::set<std::pair<int, int>> seen_pairs;
  m.bonds.reserve(*nbonds);
  for (int i = 0; i < *nbonds; ++i, ++ln) {
    if (ln >= lines.size()) throw TruncatedBlock("bond block ends early");
    const std::string_view line = lines[ln];
    const auto a1 = parse_int(field(line, 0, 3));
    const auto b1 = parse_int(field(line, 3, 3));
    const auto ord = parse_int(field(line, 6, 3));
    if (!a1 || !b1 || !ord)
      throw SdfParseError("bad bond line: '" + std::string(line) + "'");
    if (*a1 < 1 || *a1 > *natoms || *b1 < 1 || *b1 > *natoms)
      throw AtomIndexOutOfRange("bond " + std::to_string(i + 1) + " references atom " +
                                std::to_string(std::max(*a1, *b1)) + " of " +
                                std::to_string(*natoms));
    if (*a1 == *b1) throw SdfParseError("bond endpoints identical");
    if (*ord < 1 || *ord > 4)
      throw SdfParseError("unsupported bond type " + std::to_string(*ord));
    Bond b{*a1 - 1, *b1 - 1, static_cast<BondOrder>(*ord)};
    if (!seen_pairs.insert({std::min(b.a, b.b), std::max(b.a, b.b)}).second)
      throw SdfParseError("duplicate bond between atoms " + std::to_string(*a1) + " and " +
                          std::to_string(*b1));
    m.bonds.push_back(b);
  }

  // Properties block. "M  CHG" supersedes every legacy charge column value.
  bool chg_seen = false;
  for (; ln < lines.size(); ++ln) {
    const std::string_view line = lines[ln];
    if (strip(line) == "M  END" || strip(line) == "M END") {
      ++ln;
      break;
    }
    if (line.rfind("M  CHG", 0) == 0) {
      if (!chg_seen) {
        for (auto& a : m.atoms) a.formal_charge = 0;
        chg_seen = true;
      }
      const auto t = tokens(line.substr(6));
      if (t.empty()) throw SdfParseError("empty M  CHG line");
      const auto n = parse_int(t[0]);
      if (!n || t.size() < 1 + 2 * static_cast<std::size_t>(*n))
        throw SdfParseError("malformed M  CHG line: '" + std::string(line) + "'");
      for (int k = 0; k < *n; ++k) {
        const auto idx = parse_int(t[1 + 2 * k]);
        const auto chg = parse_int(t[2 + 2 * k]);
        if (!idx || !chg || *idx < 1 || *idx > *natoms)
          throw SdfParseError("malformed M  CHG entry");
        if (*chg < -15 || *chg > 15) throw SdfParseError("charge out of range");
        m.atoms[*idx - 1].formal_charge = *chg;
      }
    }
    // other property lines (M  ISO, A, V, ...) are ignored
  }

  // Data items: "> <NAME>" followed by value lines, terminated by a blank line.
  while (ln < lines.size()) {
    const std::string_view line = lines[ln];
    if (strip(line) == "$$$$") break;
    if (!line.empty() && line.front() == '>') {
      const std::size_t lt = line.find('<');
      const std::size_t gt = line.rfind('>');
      if (lt == std::string_view::npos || gt == std::string_view::npos || gt <= lt)
        throw SdfParseError("malformed data item header: '" + std::string(line) + "'");
      const std::string name(line.substr(lt + 1, gt - lt - 1));
      std::string value;
      ++ln;
      bool first = true;
      while (ln < lines.size() && !strip(lines[ln]).empty() && strip(lines[ln]) != "$$$$") {
        if (!first) value += '\n';
        value += std::string(rstrip(lines[ln]));
        first = false;
        ++ln;
      }
      if (!m.props.emplace(name, std::move(value)).second)
        throw SdfParseError("duplicate data item <" + name + ">");
    } else {
      ++ln;
    }
  }
  return m;
}

std::string serialize_molecule(const Molecule& m) {
  std::string out;
  char buf[128];
  out += m.title;
  out += "\n  tiergraph\n\n";
  std::snprintf(buf, sizeof(buf), "%3d%3d  0  0  0  0  0  0  0  0999 V2000\n",
                static_cast<int>(m.atoms.size()), static_cast<int>(m.bonds.size()));
  out += buf;
  for (const auto& a : m.atoms) {
    std::snprintf(buf, sizeof(buf),
                  "%10.4f%10.4f%10.4f %-3s 0  0  0  0  0  0  0  0  0  0  0  0\n",
                  a.position[0], a.position[1], a.position[2], a.element.c_str());
    out += buf;
  }
  for (const auto& b : m.bonds) {
    std::snprintf(buf, sizeof(buf), "%3d%3d%3d  0  0  0  0\n", b.a + 1, b.b + 1,
                  static_cast<int>(b.order));
    out += buf;
  }
  std::vector<std::pair<int, int>> charges;
  for (std::size_t i = 0; i < m.atoms.size(); ++i)
    if (m.atoms[i].formal_charge != 0)
      charges.emplace_back(static_cast<int>(i) + 1, m.atoms[i].formal_charge);
  for (std::size_t i = 0; i < charges.size(); i += 8) {
    const std::size_t n = std::min<std::size_t>(8, charges.size() - i);
    std::snprintf(buf, sizeof(buf), "M  CHG%3d", static_cast<int>(n));
    out += buf;
    for (std::size_t k = 0; k < n; ++k) {
      std::snprintf(buf, sizeof(buf), " %3d %3d", charges[i + k].first, charges[i + k].second);
      out += buf;
    }
    out += '\n';
  }
  out += "M  END\n";
  for (const auto& [name, value] : m.props) {
    out += "> <" + name + ">\n";
    out += value;
    out += "\n\n";
  }
  out += "$$$$\n";
  return out;
}

SdfReader::SdfReader(const std::string& path) {
  auto f = std::make_unique<std::ifstream>(path);
  if (!f->is_open()) throw IoError("cannot open '" + path + "'");
  owned_ = std::move(f);
  is_ = owned_.get();
}

SdfReader::SdfReader(std::istream& is) : is_(&is) {}

SdfReader::~SdfReader() = default;

std::optional<SdfItem> SdfReader::next() {
  while (true) {
    std::string block;
    std::string line;
    bool have_content = false;
    bool have_record = false;
    while (std::getline(*is_, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (strip(line) == "$$$$") {
        have_record = true;
        break;
      }
      block += line;
      block += '\n';
      if (!strip(line).empty()) have_content = true;
    }
    if (!have_content) {
      if (!have_record) return std::nullopt;  // trailing whitespace after last $$$$
      continue;
    }
    SdfItem item;
    item.index = index_++;
    try {
      item.molecule = parse_sdf_record(block);
    } catch (const std::exception& e) {
      item.error = e.what();
    }
    return item;
  }
}

std::vector<SdfItem> read_sdf_file(const std::string& path) {
  SdfReader reader(path);
  std::vector<SdfItem> items;
  while (auto item = reader.next()) items.push_back(std::move(*item));
  return items;
}

}  // namespace tiergraph
