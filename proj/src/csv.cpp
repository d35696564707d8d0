#include "msfilter/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "msfilter/model.hpp"  // ConfigError

namespace msf {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v,
                           std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  bool quote = s.find_first_of(",\"\n\r") != std::string::npos;
  if (!quote) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string CsvTable::to_string() const {
  std::string out;
  auto emit_row = [&out](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += ',';
      out += csv_field(r[i]);
    }
    out += '\n';
  };
  emit_row(header);
  for (const auto& r : rows) emit_row(r);
  return out;
}

void CsvTable::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << to_string();
  if (!f) throw ConfigError("write failed: " + path);
}

namespace {

// Parses one CSV record (handles quoted fields, may span lines).
bool parse_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false, any = false;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') { field += '"'; in.get(); }
        else in_quotes = false;
      } else field += ch;
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch == '\n') {
      fields.push_back(field);
      return true;
    } else if (ch == '\r') {
      // swallow, \r\n handled by the \n branch
    } else {
      field += ch;
    }
  }
  if (!any) return false;
  fields.push_back(field);
  return true;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric field '" + s + "' in " + where);
  }
}

std::size_t column_of(const CsvTable& t, const std::string& name,
                      const std::string& path) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return i;
  throw ConfigError("missing column '" + name + "' in " + path);
}

}  // namespace

CsvTable load_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open: " + path);
  CsvTable t;
  std::vector<std::string> fields;
  if (!parse_record(f, t.header)) throw ConfigError("empty csv: " + path);
  while (parse_record(f, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing newline
    if (fields.size() != t.header.size())
      throw ConfigError("ragged csv row in " + path);
    t.rows.push_back(fields);
  }
  return t;
}

void save_drift_cache(const DriftCache& c, const std::string& path) {
  CsvTable t;
  t.header = {"x", "bbar", "se"};
  for (std::size_t i = 0; i < c.nodes().size(); ++i)
    t.rows.push_back({fmt_double(c.nodes()[i]), fmt_double(c.values()[i]),
                      fmt_double(c.ses()[i])});
  t.save(path);
}

DriftCache load_drift_cache(const std::string& path) {
  CsvTable t = load_csv(path);
  std::size_t cx = column_of(t, "x", path);
  std::size_t cb = column_of(t, "bbar", path);
  std::size_t cs = column_of(t, "se", path);
  std::vector<double> nodes, values, ses;
  for (const auto& r : t.rows) {
    nodes.push_back(parse_double(r[cx], path));
    values.push_back(parse_double(r[cb], path));
    ses.push_back(parse_double(r[cs], path));
  }
  return DriftCache(std::move(nodes), std::move(values), std::move(ses));
}

void save_filter_trace(const FilterTrace& tr, const std::string& path) {
  CsvTable t;
  t.header = {"t", "phi_id", "pi_hat", "rho1_hat", "ess"};
  const std::size_t nf = tr.test_fns.size();
  for (std::int64_t k = 0; k <= tr.grid.steps; ++k) {
    for (std::size_t j = 0; j < nf; ++j) {
      t.rows.push_back({fmt_double(tr.grid.t(k)),
                        std::to_string(tr.test_fns[j]),
                        fmt_double(tr.pi(k, j)), fmt_double(tr.rho1(k)),
                        fmt_double(tr.ess[static_cast<std::size_t>(k)])});
    }
  }
  t.save(path);
}

void save_density(const DensityGrid& g, const std::string& path) {
  CsvTable t;
  t.header = {"x", "q"};
  for (std::size_t i = 0; i < g.q.size(); ++i)
    t.rows.push_back({fmt_double(g.node(i)), fmt_double(g.q[i])});
  t.save(path);
}

}  // namespace msf
