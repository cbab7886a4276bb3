#include "blocinfer/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace blocinfer {

double log_sum_exp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double log_beta_binomial(const VoteCounts& counts, const AlphaPair& alpha) {
  if (counts.yes < 0 || counts.no < 0) {
    throw std::domain_error("log_beta_binomial: negative counts");
  }
  if (!(alpha.a0 > 0.0) || !(alpha.a1 > 0.0)) {
    throw std::domain_error("log_beta_binomial: alpha components must be > 0");
  }
  if (counts.yes == 0 && counts.no == 0) return 0.0;  // empty sample
  const double y = static_cast<double>(counts.yes);
  const double n = static_cast<double>(counts.no);
  const double t = y + n;
  const double a0 = alpha.a0, a1 = alpha.a1;
  // choose(t, y) * B(y + a0, n + a1) / B(a0, a1), all in log space
  return std::lgamma(t + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n + 1.0)
       + std::lgamma(y + a0) + std::lgamma(n + a1) - std::lgamma(t + a0 + a1)
       + std::lgamma(a0 + a1) - std::lgamma(a0) - std::lgamma(a1);
}

double log_bloc_loglik(const VoteTable& data, int i, const AlphaPair* alpha_row) {
  double acc = 0.0;
  const int q_count = data.n_questions();
  for (int q = 0; q < q_count; ++q) {
    acc += log_beta_binomial(data.cell(i, q), alpha_row[q]);
  }
  return acc;
}

void ModelState::check_consistency(int n, int q) const {
  if (K < 1) throw std::domain_error("ModelState: K must be >= 1");
  if (static_cast<int>(eta.size()) != K) throw std::domain_error("ModelState: eta size != K");
  if (static_cast<int>(z.size()) != n) throw std::domain_error("ModelState: z size != N");
  if (static_cast<std::size_t>(K) * q != alpha.size()) {
    throw std::domain_error("ModelState: alpha size != K*Q");
  }
  double sum = 0.0;
  for (double e : eta) {
    if (!(e > 0.0)) throw std::domain_error("ModelState: eta entries must be > 0");
    sum += e;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::domain_error("ModelState: eta does not sum to 1");
  }
  for (int zi : z) {
    if (zi < 0 || zi >= K) throw std::domain_error("ModelState: z out of range");
  }
  for (const AlphaPair& a : alpha) {
    if (!(a.a0 > 0.0) || !(a.a1 > 0.0)) throw std::domain_error("ModelState: alpha must be > 0");
  }
}

double log_complete_likelihood(const VoteTable& data, const ModelState& state) {
  const int n = data.n_municipalities();
  state.check_consistency(n, data.n_questions());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const int k = state.z[i];
    acc += std::log(state.eta[k]);
    acc += log_bloc_loglik(data, i, &state.alpha[static_cast<std::size_t>(k) * data.n_questions()]);
  }
  return acc;
}

double log_marginal_mixture(const VoteTable& data, const std::vector<AlphaPair>& alpha,
                            const std::vector<double>& eta) {
  const int K = static_cast<int>(eta.size());
  const int q_count = data.n_questions();
  if (K < 1) throw std::domain_error("log_marginal_mixture: K must be >= 1");
  if (alpha.size() != static_cast<std::size_t>(K) * q_count) {
    throw std::domain_error("log_marginal_mixture: alpha size != K*Q");
  }
  double acc = 0.0;
  std::vector<double> terms(K);
  for (int i = 0; i < data.n_municipalities(); ++i) {
    for (int k = 0; k < K; ++k) {
      terms[k] = std::log(eta[k]) +
                 log_bloc_loglik(data, i, &alpha[static_cast<std::size_t>(k) * q_count]);
    }
    acc += log_sum_exp(terms);
  }
  return acc;
}

AlphaPair sample_alpha_prior(const Hyperparams& hyper, Rng& rng) {
  hyper.validate();
  return AlphaPair{rng.gamma(hyper.kappa, hyper.theta), rng.gamma(hyper.kappa, hyper.theta)};
}

}  // namespace blocinfer
