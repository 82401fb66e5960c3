#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "granular/fuzzy.hpp"
#include "granular/inference.hpp"
#include "granular/model.hpp"
#include "granular/possibility.hpp"

namespace granular::io {

/// Plain comma-separated table: UTF-8, no quoting, dot decimal.
struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based, for error messages

  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  /// Parses a cell as a finite double; errors carry row and column coordinates.
  double number(std::size_t row, std::size_t col) const;
};

CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");
CsvTable read_csv(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

/// Shortest round-trip decimal representation.
std::string format_number(double v);

PossibilityAssignment read_possibility(const CsvTable& table);

struct LabeledMembership {
  std::string id;
  MembershipVector membership;
};

/// Header id,K,y0..yKmax; cells past a row's K are left empty.
std::string write_counts(const std::vector<LabeledMembership>& counts);
std::vector<LabeledMembership> read_counts(const CsvTable& table);

struct StatsRow {
  std::string sample_id;
  FitResult fit;
};
/// Header sample_id,c,h,K,sse,converged.
std::string write_stats(const std::vector<StatsRow>& rows);

struct LabeledObservation {
  std::string sample_id;
  FuzzyObservation obs;
  long y_latent = -1;  // -1 when absent
};
/// Reads sample_id,c,h,K; any further columns are ignored.
std::vector<LabeledObservation> read_observations(const CsvTable& table);
/// Header sample_id,c,h,K[,y_latent].
std::string write_observations(const std::vector<LabeledObservation>& rows, bool with_latent);

struct Covariates {
  std::vector<std::string> sample_ids;
  std::vector<std::string> names;
  Eigen::MatrixXd values;
  Eigen::VectorXd offsets;  // column "offset" if present, else ones
};
/// Header sample_id,<covariates...>[,offset].
Covariates read_covariates(const CsvTable& table);
std::string write_covariates(const Covariates& cov);

/// One row per draw: chain,iter,<parameters>,energy,divergent.
std::string write_draws(const PosteriorDraws& draws);
PosteriorDraws read_draws(const CsvTable& table);

}  // namespace granular::io
