#include "granular/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "granular/errors.hpp"

namespace granular::io {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError(source + ": missing column \"" + name + "\"");
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& cell = rows.at(row).at(col);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw ValidationError(source + ": malformed number \"" + cell + "\" at line " +
                          std::to_string(line_numbers.at(row)) + ", column " + std::to_string(col + 1) +
                          " (" + header.at(col) + ")");
  }
  return v;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  t.source = source;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() > t.header.size()) {
      throw ValidationError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(t.header.size()));
    }
    cells.resize(t.header.size());
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw ValidationError(source + ": empty file");
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path), path.string()); }

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

PossibilityAssignment read_possibility(const CsvTable& table) {
  if (table.header.empty() || table.header.front().empty()) {
    throw ValidationError(table.source + ": header must name the referents");
  }
  if (table.rows.empty()) throw ValidationError(table.source + ": possibility matrix has no observations");
  const std::size_t n_ref = table.header.size();
  std::vector<double> degrees;
  degrees.reserve(table.rows.size() * n_ref);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < n_ref; ++c) {
      const double v = table.number(r, c);
      if (v < 0.0 || v > 1.0) {
        throw ValidationError(table.source + ": degree " + table.rows[r][c] + " outside [0,1] at line " +
                              std::to_string(table.line_numbers[r]) + ", column " + std::to_string(c + 1));
      }
      degrees.push_back(v);
    }
  }
  return PossibilityAssignment(table.rows.size(), n_ref, std::move(degrees), table.header);
}

std::string write_counts(const std::vector<LabeledMembership>& counts) {
  std::size_t kmax = 0;
  for (const auto& c : counts) kmax = std::max(kmax, c.membership.k_max);
  std::ostringstream out;
  out << "id,K";
  for (std::size_t y = 0; y <= kmax; ++y) out << ",y" << y;
  out << '\n';
  for (const auto& c : counts) {
    out << c.id << ',' << c.membership.k_max;
    for (std::size_t y = 0; y <= kmax; ++y) {
      out << ',';
      if (y <= c.membership.k_max) out << format_number(c.membership.xi[y]);
    }
    out << '\n';
  }
  return out.str();
}

std::vector<LabeledMembership> read_counts(const CsvTable& table) {
  const std::size_t id_col = table.column("id"), k_col = table.column("K");
  std::vector<LabeledMembership> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double kd = table.number(r, k_col);
    if (kd < 0 || kd != std::floor(kd)) {
      throw ValidationError(table.source + ": K must be a non-negative integer at line " +
                            std::to_string(table.line_numbers[r]));
    }
    const auto k = static_cast<std::size_t>(kd);
    std::vector<double> xi(k + 1);
    for (std::size_t y = 0; y <= k; ++y) xi[y] = table.number(r, table.column("y" + std::to_string(y)));
    LabeledMembership lm;
    lm.id = table.rows[r][id_col];
    lm.membership.k_max = k;
    lm.membership.xi = std::move(xi);
    for (double v : lm.membership.xi) {
      if (v < 0.0 || v > 1.0) {
        throw ValidationError(table.source + ": membership outside [0,1] at line " + std::to_string(table.line_numbers[r]));
      }
    }
    out.push_back(std::move(lm));
  }
  return out;
}

std::string write_stats(const std::vector<StatsRow>& rows) {
  std::ostringstream out;
  out << "sample_id,c,h,K,sse,converged\n";
  for (const auto& r : rows) {
    out << r.sample_id << ',' << format_number(r.fit.params.c) << ',' << format_number(r.fit.params.h) << ','
        << r.fit.params.k_max << ',' << format_number(r.fit.sse) << ',' << (r.fit.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

std::vector<LabeledObservation> read_observations(const CsvTable& table) {
  const std::size_t id = table.column("sample_id"), c = table.column("c"), h = table.column("h"),
                    k = table.column("K");
  const bool latent = table.has_column("y_latent");
  std::vector<LabeledObservation> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    LabeledObservation o;
    o.sample_id = table.rows[r][id];
    o.obs.c = table.number(r, c);
    o.obs.h = table.number(r, h);
    const double kd = table.number(r, k);
    if (kd < 1 || kd != std::floor(kd)) {
      throw ValidationError(table.source + ": K must be an integer >= 1 at line " + std::to_string(table.line_numbers[r]));
    }
    o.obs.k = static_cast<std::size_t>(kd);
    if (o.obs.c < 0.0 || o.obs.c > kd || !(o.obs.h > 0.0)) {
      throw ValidationError(table.source + ": need 0 <= c <= K and h > 0 at line " + std::to_string(table.line_numbers[r]));
    }
    if (latent && !table.rows[r][table.column("y_latent")].empty()) {
      o.y_latent = static_cast<long>(table.number(r, table.column("y_latent")));
    }
    out.push_back(std::move(o));
  }
  return out;
}

std::string write_observations(const std::vector<LabeledObservation>& rows, bool with_latent) {
  std::ostringstream out;
  out << "sample_id,c,h,K" << (with_latent ? ",y_latent" : "") << '\n';
  for (const auto& r : rows) {
    out << r.sample_id << ',' << format_number(r.obs.c) << ',' << format_number(r.obs.h) << ',' << r.obs.k;
    if (with_latent) out << ',' << r.y_latent;
    out << '\n';
  }
  return out.str();
}

Covariates read_covariates(const CsvTable& table) {
  const std::size_t id = table.column("sample_id");
  Covariates cov;
  std::vector<std::size_t> cols;
  std::size_t offset_col = table.header.size();
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == id) continue;
    if (table.header[c] == "offset") {
      offset_col = c;
    } else {
      cols.push_back(c);
      cov.names.push_back(table.header[c]);
    }
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  cov.values.resize(n, static_cast<Eigen::Index>(cols.size()));
  cov.offsets = Eigen::VectorXd::Ones(n);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    cov.sample_ids.push_back(table.rows[r][id]);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      cov.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = table.number(r, cols[j]);
    }
    if (offset_col < table.header.size()) {
      const double u = table.number(r, offset_col);
      if (!(u > 0.0)) {
        throw ValidationError(table.source + ": offset must be positive at line " + std::to_string(table.line_numbers[r]));
      }
      cov.offsets[static_cast<Eigen::Index>(r)] = u;
    }
  }
  return cov;
}

std::string write_covariates(const Covariates& cov) {
  std::ostringstream out;
  out << "sample_id";
  for (const auto& n : cov.names) out << ',' << n;
  out << ",offset\n";
  for (Eigen::Index i = 0; i < cov.values.rows(); ++i) {
    out << cov.sample_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < cov.values.cols(); ++j) out << ',' << format_number(cov.values(i, j));
    out << ',' << format_number(cov.offsets[i]) << '\n';
  }
  return out.str();
}

std::string write_draws(const PosteriorDraws& draws) {
  std::ostringstream out;
  out << "chain,iter";
  for (const auto& n : draws.names) out << ',' << n;
  out << ",energy,divergent\n";
  for (Eigen::Index r = 0; r < draws.draws.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    out << draws.chain[i] << ',' << draws.iteration[i];
    for (Eigen::Index j = 0; j < draws.draws.cols(); ++j) out << ',' << format_number(draws.draws(r, j));
    out << ',' << format_number(draws.energy[i]) << ',' << static_cast<int>(draws.divergent[i]) << '\n';
  }
  return out.str();
}

PosteriorDraws read_draws(const CsvTable& table) {
  const std::size_t chain_col = table.column("chain"), iter_col = table.column("iter");
  const std::size_t energy_col = table.column("energy"), div_col = table.column("divergent");
  std::vector<std::size_t> cols;
  PosteriorDraws d;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == chain_col || c == iter_col || c == energy_col || c == div_col) continue;
    cols.push_back(c);
    d.names.push_back(table.header[c]);
  }
  if (table.rows.empty()) throw ValidationError(table.source + ": no draws");
  std::map<int, int> per_chain;
  d.draws.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const int chain = static_cast<int>(table.number(r, chain_col));
    if (!d.chain.empty() && chain < d.chain.back()) {
      throw ValidationError(table.source + ": draws must be grouped by chain in ascending order");
    }
    d.chain.push_back(chain);
    d.iteration.push_back(static_cast<int>(table.number(r, iter_col)));
    d.energy.push_back(table.number(r, energy_col));
    d.divergent.push_back(table.number(r, div_col) != 0.0 ? 1 : 0);
    ++per_chain[chain];
    for (std::size_t j = 0; j < cols.size(); ++j) {
      d.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = table.number(r, cols[j]);
    }
  }
  d.n_chains = static_cast<int>(per_chain.size());
  d.n_draws = per_chain.begin()->second;
  for (const auto& [c, n] : per_chain) {
    if (n != d.n_draws) throw ValidationError(table.source + ": chains have unequal draw counts");
  }
  d.chains.resize(per_chain.size());
  for (std::size_t r = 0; r < d.divergent.size(); ++r) {
    if (d.divergent[r]) ++d.chains[static_cast<std::size_t>(std::distance(per_chain.begin(), per_chain.find(d.chain[r])))].divergences;
  }
  d.diagnostics = diagnostics(d);
  return d;
}

}  // namespace granular::io
