// Writes the bundled synthetic example: one possibility matrix per sample
// (reads x genes), a covariates table and the two-outcome kernel used by
// kernel-audit. Usage: make_example_data <out-dir> [n_samples] [seed]
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "granular/csv.hpp"
#include "granular/rng.hpp"

namespace fs = std::filesystem;
using granular::io::format_number;

namespace {

constexpr const char* kGenes[] = {"geneA", "geneB", "geneC"};
constexpr int kNumGenes = 3;

long negbin(granular::Rng& rng, double mu, double kappa) {
  boost::random::gamma_distribution<double> gamma(kappa, mu / kappa);
  boost::random::poisson_distribution<long> pois(gamma(rng));
  return pois(rng);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_example_data <out-dir> [n_samples] [seed]\n";
    return 2;
  }
  const fs::path dir = argv[1];
  const int n = argc > 2 ? std::stoi(argv[2]) : 40;
  const std::uint64_t seed = argc > 3 ? std::stoull(argv[3]) : 2024;
  fs::create_directories(dir / "possibility");

  auto rng = granular::make_stream(seed, 0);
  boost::random::normal_distribution<double> normal;
  boost::random::bernoulli_distribution<double> ambiguous(0.35);
  boost::random::uniform_int_distribution<int> degree_step(2, 9);
  boost::random::uniform_int_distribution<int> other_gene(1, kNumGenes - 1);

  std::ostringstream cov;
  cov << "sample_id,x1,offset\n";
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "s%03d", i + 1);
    const double x = normal(rng);
    const double offset = 0.8 + 0.4 * (i % 5) / 4.0;
    cov << id << ',' << format_number(x) << ',' << format_number(offset) << '\n';

    // Reads whose true origin is geneA, plus background reads from the others.
    const long own = std::max(1L, negbin(rng, offset * std::exp(2.5 + 0.5 * x), 3.0));
    const long background = negbin(rng, 15.0, 5.0);
    std::ostringstream csv;
    csv << kGenes[0] << ',' << kGenes[1] << ',' << kGenes[2] << '\n';
    for (long r = 0; r < own + background; ++r) {
      double deg[kNumGenes] = {0.0, 0.0, 0.0};
      const int truth = r < own ? 0 : 1 + static_cast<int>(r % 2);
      deg[truth] = 1.0;
      if (ambiguous(rng)) {
        const int alt = (truth + other_gene(rng)) % kNumGenes;
        deg[alt] = degree_step(rng) / 10.0;
      }
      csv << format_number(deg[0]) << ',' << format_number(deg[1]) << ',' << format_number(deg[2]) << '\n';
    }
    granular::io::write_file(dir / "possibility" / (std::string(id) + ".csv"), csv.str());
  }
  granular::io::write_file(dir / "covariates.csv", cov.str());

  // Two graded outcomes on {0,..,3} with uniform weights.
  granular::io::write_file(dir / "kernel.json",
                           "{\n  \"outcomes\": [[1.0, 0.5, 0.5, 0.25], [0.25, 0.5, 1.0, 1.0]],\n"
                           "  \"nu\": [0.5, 0.5]\n}\n");
  std::cout << "wrote " << n << " samples to " << dir.string() << '\n';
  return 0;
}
