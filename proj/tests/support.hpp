#pragma once

// Shared oracles and fixtures for the test suites. Everything here is
// independent of the library's computation paths: the quadrature oracle
// integrates the Binomial x Beta product directly, and the statistics
// helpers implement standard estimators from scratch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "blocinfer/model.hpp"
#include "blocinfer/types.hpp"

namespace testsupport {

// Tanh-sinh quadrature over (0, 1). Handles the integrable endpoint
// singularities that p^(a-1) (1-p)^(b-1) produces for a, b < 1. The
// integrand receives (p, 1 - p) so both tails stay accurate.
inline double tanh_sinh_01(const std::function<double(double, double)>& f,
                           double rel_tol = 1e-13) {
  const double t_max = 6.0;
  const double half_pi = 1.5707963267948966;
  double previous = 0.0;
  double estimate = 0.0;
  for (int level = 0; level <= 10; ++level) {
    const double h = 1.0 / static_cast<double>(1 << level);
    double sum = 0.0;
    const int k_max = static_cast<int>(t_max / h);
    for (int k = -k_max; k <= k_max; ++k) {
      // at refined levels only the new (odd) nodes would be needed; a full
      // recompute keeps this simple and is still cheap
      const double t = k * h;
      const double s = half_pi * std::sinh(t);
      const double p = 1.0 / (1.0 + std::exp(-2.0 * s));
      const double one_minus_p = 1.0 / (1.0 + std::exp(2.0 * s));
      if (p <= 0.0 || one_minus_p <= 0.0) continue;
      const double sech = 1.0 / std::cosh(s);
      const double w = half_pi * std::cosh(t) * 0.5 * sech * sech;
      const double fx = f(p, one_minus_p);
      if (std::isfinite(fx)) sum += w * fx;
    }
    estimate = sum * h;
    if (level >= 3 && std::abs(estimate - previous) <=
                          rel_tol * std::max(std::abs(estimate), 1e-300)) {
      break;
    }
    previous = estimate;
  }
  return estimate;
}

// Oracle for the Beta-binomial likelihood: adaptive integration of
// Binomial(y | n, p) Beta(p | a0, a1) over p, returned in log space.
inline double log_beta_binomial_oracle(std::int64_t yes, std::int64_t no, double a0, double a1) {
  const double y = static_cast<double>(yes);
  const double n = static_cast<double>(no);
  const double t = y + n;
  const double log_choose = std::lgamma(t + 1.0) - std::lgamma(y + 1.0) - std::lgamma(n + 1.0);
  const double log_beta_norm = std::lgamma(a0) + std::lgamma(a1) - std::lgamma(a0 + a1);
  const double integral = tanh_sinh_01([&](double p, double q) {
    return std::exp((y + a0 - 1.0) * std::log(p) + (n + a1 - 1.0) * std::log(q));
  });
  return log_choose - log_beta_norm + std::log(integral);
}

struct Moment {
  double mean = 0.0;
  double se = 0.0;  // batch-means standard error (autocorrelation robust)
};

inline Moment batch_mean(const std::vector<double>& xs, int n_batches = 100) {
  Moment m;
  const std::size_t len = xs.size() / n_batches;
  std::vector<double> batches;
  for (int b = 0; b < n_batches; ++b) {
    double acc = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) acc += xs[i];
    batches.push_back(acc / static_cast<double>(len));
  }
  for (double b : batches) m.mean += b;
  m.mean /= n_batches;
  double ss = 0.0;
  for (double b : batches) ss += (b - m.mean) * (b - m.mean);
  m.se = std::sqrt(ss / (n_batches - 1.0) / n_batches);
  return m;
}

inline double total_variation(const std::map<int, double>& a, const std::map<int, double>& b) {
  double tv = 0.0;
  std::map<int, double> merged = a;
  for (const auto& [k, v] : b) merged[k] += 0.0;
  for (const auto& [k, unused] : merged) {
    const auto ia = a.find(k);
    const auto ib = b.find(k);
    tv += std::abs((ia == a.end() ? 0.0 : ia->second) - (ib == b.end() ? 0.0 : ib->second));
  }
  return 0.5 * tv;
}

inline std::map<int, double> truncated_poisson(double lambda, int lo, int hi) {
  std::map<int, double> pmf;
  double total = 0.0;
  for (int k = lo; k <= hi; ++k) {
    const double p = std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0));
    pmf[k] = p;
    total += p;
  }
  for (auto& [k, p] : pmf) p /= total;
  return pmf;
}

// Split-Rhat over several chains of equal length.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    halves.emplace_back(c.begin(), c.begin() + half);
    halves.emplace_back(c.begin() + half, c.begin() + 2 * half);
  }
  const double m = static_cast<double>(halves.size());
  const double len = static_cast<double>(halves.front().size());
  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& h : halves) {
    double mu = std::accumulate(h.begin(), h.end(), 0.0) / len;
    double ss = 0.0;
    for (double x : h) ss += (x - mu) * (x - mu);
    means.push_back(mu);
    vars.push_back(ss / (len - 1.0));
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= len / (m - 1.0);
  const double w = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  const double var_plus = (len - 1.0) / len * w + b / len;
  return std::sqrt(var_plus / w);
}

// Small dense vote table with no metadata frills.
inline blocinfer::VoteTable make_table(int n, int q,
                                       const std::vector<blocinfer::VoteCounts>& counts) {
  blocinfer::VoteTable data;
  data.municipalities.resize(n);
  for (int i = 0; i < n; ++i) {
    data.municipalities[i].id = "m" + std::to_string(i + 1);
    data.municipalities[i].name = data.municipalities[i].id;
  }
  data.questions.resize(q);
  for (int j = 0; j < q; ++j) {
    data.questions[j].id = "q" + std::to_string(j + 1);
    data.questions[j].year = 2000 + j;
  }
  data.counts = counts;
  return data;
}

// Exact z-posterior by exhaustive enumeration, marginalizing eta under a
// symmetric Dirichlet(gamma) prior. Returns probabilities indexed by the
// base-K encoding of z.
inline std::vector<double> enumerate_z_posterior(const blocinfer::VoteTable& data,
                                                 const std::vector<blocinfer::AlphaPair>& alpha,
                                                 int K, double gamma) {
  const int n = data.n_municipalities();
  const int q_count = data.n_questions();
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= K;
  std::vector<double> logp(total);
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<int> z(n);
    std::size_t rem = code;
    for (int i = 0; i < n; ++i) {
      z[i] = static_cast<int>(rem % K);
      rem /= K;
    }
    std::vector<int> d(K, 0);
    for (int zi : z) d[zi]++;
    // Dirichlet-multinomial marginal of the assignment vector
    double lp = std::lgamma(K * gamma) - std::lgamma(n + K * gamma);
    for (int k = 0; k < K; ++k) lp += std::lgamma(d[k] + gamma) - std::lgamma(gamma);
    for (int i = 0; i < n; ++i) {
      lp += blocinfer::log_bloc_loglik(data, i, &alpha[static_cast<std::size_t>(z[i]) * q_count]);
    }
    logp[code] = lp;
  }
  const double norm = blocinfer::log_sum_exp(logp);
  std::vector<double> probs(total);
  for (std::size_t c = 0; c < total; ++c) probs[c] = std::exp(logp[c] - norm);
  return probs;
}

}  // namespace testsupport
