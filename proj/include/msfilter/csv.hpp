#pragma once
// RFC-4180 CSV persistence. Numbers are written with 17 significant digits so a
// reproduced run compares byte-identical; strings are quoted only when needed.
#include <string>
#include <vector>

#include "msfilter/averaging.hpp"
#include "msfilter/filter.hpp"
#include "msfilter/zakai_fd.hpp"

namespace msf {

std::string fmt_double(double v);
std::string csv_field(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const;
  void save(const std::string& path) const;
};

CsvTable load_csv(const std::string& path);

// columns: x, bbar, se
void save_drift_cache(const DriftCache& c, const std::string& path);
DriftCache load_drift_cache(const std::string& path);

// columns: t, phi_id, pi_hat, rho1_hat, ess
void save_filter_trace(const FilterTrace& tr, const std::string& path);

// columns: x, q
void save_density(const DensityGrid& g, const std::string& path);

}  // namespace msf
