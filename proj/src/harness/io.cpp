#include "mtedebias/harness/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mtedebias/errors.hpp"
#include "mtedebias/harness/config.hpp"

namespace mte::harness {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format_number(std::size_t value) { return std::to_string(value); }

std::string CsvTable::render() const {
  std::string out = "# mtedebias " + kind + " schema " + std::to_string(kSchemaVersion) + "\n";
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::string render_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

nlohmann::json number_or_null(double value) { return std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(); }

std::string sample_csv(const dgp::Sample& sample, bool latent) {
  CsvTable t;
  t.kind = "sample";
  t.header = {"y", "d_star", "x", "z"};
  if (latent) t.header.insert(t.header.end(), {"s", "d", "d_tilde", "u_d"});
  const auto& o = sample.observed;
  const auto& l = sample.latent;
  t.rows.reserve(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) {
    std::vector<std::string> r{format_number(o.y[i]), std::to_string(o.d_star[i]), format_number(o.x[i]),
                               format_number(o.z[i])};
    if (latent)
      r.insert(r.end(), {std::to_string(l.s[i]), std::to_string(l.d[i]), std::to_string(l.d_tilde[i]),
                         format_number(l.u_d[i])});
    t.add(std::move(r));
  }
  return t.render();
}

namespace {

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError(where + ": '" + s + "' is not a number");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

dgp::ObservedData read_sample_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sample file '" + path + "'");
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
  }
  const auto header = split(line);
  int col_y = -1, col_d = -1, col_x = -1, col_z = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "y") col_y = static_cast<int>(i);
    if (header[i] == "d_star") col_d = static_cast<int>(i);
    if (header[i] == "x") col_x = static_cast<int>(i);
    if (header[i] == "z") col_z = static_cast<int>(i);
  }
  if (col_y < 0 || col_d < 0 || col_x < 0 || col_z < 0)
    throw IoError("sample file '" + path + "': header must contain y, d_star, x, z");
  dgp::ObservedData data;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw IoError("sample file '" + path + "' line " + std::to_string(lineno) + ": wrong number of fields");
    const std::string where = path + ":" + std::to_string(lineno);
    data.y.push_back(parse_double(cells[col_y], where));
    const double d = parse_double(cells[col_d], where);
    if (d != 0.0 && d != 1.0) throw IoError(where + ": d_star must be 0 or 1");
    data.d_star.push_back(static_cast<std::uint8_t>(d));
    data.x.push_back(parse_double(cells[col_x], where));
    data.z.push_back(parse_double(cells[col_z], where));
  }
  if (data.size() == 0) throw IoError("sample file '" + path + "' has no rows");
  return data;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace mte::harness
