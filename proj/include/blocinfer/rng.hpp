#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace blocinfer {

// Seeded RNG passed explicitly to every stochastic operation. Chains and
// simulation replicates derive independent streams from a root seed via
// splitmix64 so that runs are reproducible for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Independent stream for (root, index); index 0 is not the root stream.
  static Rng stream(std::uint64_t root_seed, std::uint64_t index) {
    return Rng(splitmix64(root_seed ^ splitmix64(index + 1)));
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Inclusive range.
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }

  double gamma(double shape, double scale) {
    if (!(shape > 0) || !(scale > 0)) throw std::domain_error("gamma: shape and scale must be > 0");
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }

  double beta(double a, double b) {
    double x = gamma(a, 1.0);
    double y = gamma(b, 1.0);
    return x / (x + y);
  }

  double exponential(double mean) {
    return std::exponential_distribution<double>(1.0 / mean)(engine_);
  }

  std::int64_t binomial(std::int64_t n, double p) {
    if (n <= 0) return 0;
    return std::binomial_distribution<std::int64_t>(n, p)(engine_);
  }

  // Poisson(mean) conditioned on lo <= k <= hi, by rejection.
  int poisson_truncated(double mean, int lo, int hi) {
    std::poisson_distribution<int> dist(mean);
    for (;;) {
      int k = dist(engine_);
      if (k >= lo && k <= hi) return k;
    }
  }

  std::vector<double> dirichlet(const std::vector<double>& concentration) {
    std::vector<double> out(concentration.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < concentration.size(); ++k) {
      out[k] = gamma(concentration[k], 1.0);
      sum += out[k];
    }
    if (sum <= 0.0) {
      // all-zero draws can occur for very small concentrations; retry
      return dirichlet(concentration);
    }
    for (double& x : out) x /= sum;
    return out;
  }

  // Categorical draw from unnormalized log-weights, 0-based.
  int categorical_from_log(const std::vector<double>& logw) {
    double m = logw[0];
    for (double w : logw) m = std::max(m, w);
    double total = 0.0;
    std::vector<double> p(logw.size());
    for (std::size_t k = 0; k < logw.size(); ++k) {
      p[k] = std::exp(logw[k] - m);
      total += p[k];
    }
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
      acc += p[k];
      if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(p.size()) - 1;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace blocinfer
