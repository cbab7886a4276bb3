#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blocinfer {

struct Municipality {
  std::string id;
  std::string name;
  std::optional<double> latitude;   // degrees
  std::optional<double> longitude;  // degrees
};

struct QuestionInfo {
  std::string id;
  int year = 0;
  std::string ballot_label;
  std::string content_tag;
};

struct VoteCounts {
  std::int64_t yes = 0;
  std::int64_t no = 0;
  std::int64_t total() const { return yes + no; }
};

// Dense N x Q table of yes/no counts. Ingestion enforces N,Q >= 1 and
// total >= 1 per cell; degenerate shapes (N = 0 or Q = 0) are permitted
// in memory for prior-only runs.
struct VoteTable {
  std::vector<Municipality> municipalities;
  std::vector<QuestionInfo> questions;
  std::vector<VoteCounts> counts;  // row-major, municipality-major

  int n_municipalities() const { return static_cast<int>(municipalities.size()); }
  int n_questions() const { return static_cast<int>(questions.size()); }

  const VoteCounts& cell(int i, int q) const {
    return counts[static_cast<std::size_t>(i) * questions.size() + q];
  }
  VoteCounts& cell(int i, int q) {
    return counts[static_cast<std::size_t>(i) * questions.size() + q];
  }
};

// Shape/scale parameter pair shared by Gamma priors, MH proposals and the
// simulation generator.
struct GammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

struct Hyperparams {
  double kappa = 1.0;       // Gamma shape for each alpha component
  double theta = 10.0;      // Gamma scale for each alpha component
  double lambda = 10.0;     // Poisson mean for K
  double gamma = 1.0;       // symmetric Dirichlet concentration for eta
  double beta_birth = 10.0; // BD birth rate, defaults to lambda
  int k_max = 30;           // truncation cap on K

  void validate() const {
    if (!(kappa > 0) || !(theta > 0) || !(lambda > 0) || !(gamma > 0) ||
        !(beta_birth >= 0) || k_max < 1) {
      throw std::domain_error("Hyperparams: all rates must be positive, k_max >= 1");
    }
  }
};

struct AlphaPair {
  double a0 = 1.0;  // 'yes' pseudo-mass
  double a1 = 1.0;  // 'no' pseudo-mass
  double total() const { return a0 + a1; }
  double mean_support() const { return a0 / (a0 + a1); }
};

// Mixture state for a fixed K. Bloc indices are 0-based internally;
// serialized forms use 1-based labels.
struct ModelState {
  int K = 1;
  std::vector<double> eta;       // length K, simplex
  std::vector<int> z;            // length N, entries in [0, K)
  std::vector<AlphaPair> alpha;  // K x Q row-major

  int n_questions() const {
    return K == 0 ? 0 : static_cast<int>(alpha.size()) / K;
  }
  const AlphaPair& alpha_at(int k, int q) const {
    return alpha[static_cast<std::size_t>(k) * n_questions() + q];
  }
  AlphaPair& alpha_at(int k, int q) {
    return alpha[static_cast<std::size_t>(k) * n_questions() + q];
  }

  std::vector<int> bloc_sizes() const {
    std::vector<int> d(K, 0);
    for (int zi : z) d[zi]++;
    return d;
  }

  void check_consistency(int n, int q) const;
};

// Latent Stein-Meng success counts r, N x Q x 2.
struct AugmentedCounts {
  int n = 0, q = 0;
  std::vector<std::int64_t> r;  // (i, q, s) row-major

  AugmentedCounts() = default;
  AugmentedCounts(int n_, int q_) : n(n_), q(q_), r(static_cast<std::size_t>(n_) * q_ * 2, 0) {}

  std::int64_t at(int i, int qq, int s) const {
    return r[(static_cast<std::size_t>(i) * q + qq) * 2 + s];
  }
  std::int64_t& at(int i, int qq, int s) {
    return r[(static_cast<std::size_t>(i) * q + qq) * 2 + s];
  }
};

// Minimal dense row-major matrix used by the analysis products.
struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}

  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
};

}  // namespace blocinfer
