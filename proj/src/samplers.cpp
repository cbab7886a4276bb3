#include "blocinfer/samplers.hpp"

#include <cmath>
#include <stdexcept>

namespace blocinfer {

namespace detail {

double log_gamma_pdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

std::vector<std::int64_t> member_totals(const VoteTable& data, const std::vector<int>& z,
                                        int k, int q) {
  std::vector<std::int64_t> totals;
  for (int i = 0; i < data.n_municipalities(); ++i) {
    if (z[i] == k) totals.push_back(data.cell(i, q).total());
  }
  return totals;
}

}  // namespace detail

void renormalize_eta(std::vector<double>& eta) {
  double sum = 0.0;
  for (double& e : eta) {
    e = std::max(e, 1e-300);  // repeated birth rescaling can underflow a weight
    sum += e;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    for (double& e : eta) e /= sum;
  }
}

std::vector<double> update_eta(const std::vector<int>& z, int K, double gamma, Rng& rng) {
  std::vector<double> conc(K, gamma);
  for (int zi : z) conc[zi] += 1.0;
  std::vector<double> eta = rng.dirichlet(conc);
  renormalize_eta(eta);
  return eta;
}

std::vector<int> update_z(const VoteTable& data, const std::vector<AlphaPair>& alpha,
                          const std::vector<double>& eta, Rng& rng) {
  const int K = static_cast<int>(eta.size());
  const int q_count = data.n_questions();
  std::vector<int> z(data.n_municipalities());
  std::vector<double> logw(K);
  std::vector<double> log_eta(K);
  for (int k = 0; k < K; ++k) log_eta[k] = std::log(eta[k]);
  for (int i = 0; i < data.n_municipalities(); ++i) {
    for (int k = 0; k < K; ++k) {
      logw[k] = log_eta[k] +
                log_bloc_loglik(data, i, &alpha[static_cast<std::size_t>(k) * q_count]);
    }
    z[i] = K == 1 ? 0 : rng.categorical_from_log(logw);
  }
  return z;
}

AugmentedCounts update_augmentation(const VoteTable& data, const std::vector<int>& z,
                                    const std::vector<AlphaPair>& alpha, Rng& rng) {
  const int n = data.n_municipalities();
  const int q_count = data.n_questions();
  AugmentedCounts r(n, q_count);
  for (int i = 0; i < n; ++i) {
    const AlphaPair* row = &alpha[static_cast<std::size_t>(z[i]) * q_count];
    for (int q = 0; q < q_count; ++q) {
      const VoteCounts& c = data.cell(i, q);
      for (int s = 0; s < 2; ++s) {
        const double a = s == 0 ? row[q].a0 : row[q].a1;
        const std::int64_t count = s == 0 ? c.yes : c.no;
        std::int64_t succ = count > 0 ? 1 : 0;  // m = 1 term has probability a/a = 1
        for (std::int64_t m = 2; m <= count; ++m) {
          if (rng.bernoulli(a / (a + static_cast<double>(m) - 1.0))) ++succ;
        }
        r.at(i, q, s) = succ;
      }
    }
  }
  return r;
}

double sampler1_log_target(double t, std::int64_t sum_r_total,
                           const std::vector<std::int64_t>& member_totals,
                           const Hyperparams& hyper) {
  if (!(t > 0.0)) return -std::numeric_limits<double>::infinity();
  double acc = detail::log_gamma_pdf(t, 2.0 * hyper.kappa, hyper.theta);
  acc += static_cast<double>(sum_r_total) * std::log(t);
  for (std::int64_t n_i : member_totals) {
    acc += std::lgamma(t) - std::lgamma(t + static_cast<double>(n_i));
  }
  return acc;
}

double sampler1_proposal_logpdf(double from, double to, const GammaParams& prop) {
  // to = from * g / mean(g), g ~ Gamma(shape, scale); change of variables in g.
  const double mean = prop.shape * prop.scale;
  const double g = to * mean / from;
  return detail::log_gamma_pdf(g, prop.shape, prop.scale) + std::log(mean / from);
}

AlphaPair update_alpha_sampler1(int k, int q, const VoteTable& data, const std::vector<int>& z,
                                const AugmentedCounts& r, const std::vector<AlphaPair>& alpha,
                                const Hyperparams& hyper, const SweepConfig& config, Rng& rng) {
  const AlphaPair cur = alpha[static_cast<std::size_t>(k) * data.n_questions() + q];
  std::int64_t s0 = 0, s1 = 0;
  for (int i = 0; i < data.n_municipalities(); ++i) {
    if (z[i] == k) {
      s0 += r.at(i, q, 0);
      s1 += r.at(i, q, 1);
    }
  }
  const std::vector<std::int64_t> totals = detail::member_totals(data, z, k, q);

  // MH on t = a0 + a1 with a unit-mean multiplicative Gamma step.
  const GammaParams& prop = config.alpha_total_proposal;
  double t = cur.total();
  const double mean = prop.shape * prop.scale;
  const double t_prop = t * rng.gamma(prop.shape, prop.scale) / mean;
  if (t_prop > 0.0) {
    const double log_accept = sampler1_log_target(t_prop, s0 + s1, totals, hyper) -
                              sampler1_log_target(t, s0 + s1, totals, hyper) +
                              sampler1_proposal_logpdf(t_prop, t, prop) -
                              sampler1_proposal_logpdf(t, t_prop, prop);
    if (log_accept >= 0.0 || std::log(rng.uniform()) < log_accept) t = t_prop;
  }

  // Exact conjugate draw for p = a0 / (a0 + a1).
  const double p = rng.beta(hyper.kappa + static_cast<double>(s0),
                            hyper.kappa + static_cast<double>(s1));
  return AlphaPair{t * p, t * (1.0 - p)};
}

double sampler2_log_target(double a, double a_other, std::int64_t sum_r_s,
                           const std::vector<std::int64_t>& member_totals,
                           const Hyperparams& hyper) {
  if (!(a > 0.0)) return -std::numeric_limits<double>::infinity();
  double acc = detail::log_gamma_pdf(a, hyper.kappa + static_cast<double>(sum_r_s), hyper.theta);
  acc += static_cast<double>(member_totals.size()) * std::lgamma(a + a_other);
  for (std::int64_t n_i : member_totals) {
    acc -= std::lgamma(a + a_other + static_cast<double>(n_i));
  }
  return acc;
}

double sampler2_proposal_logpdf(double to, const GammaParams& prop) {
  return detail::log_gamma_pdf(to, prop.shape, prop.scale);
}

double update_alpha_sampler2(int k, int q, int s, const VoteTable& data,
                             const std::vector<int>& z, const AugmentedCounts& r,
                             const std::vector<AlphaPair>& alpha, const Hyperparams& hyper,
                             const SweepConfig& config, Rng& rng) {
  if (s != 0 && s != 1) throw std::domain_error("update_alpha_sampler2: s must be 0 or 1");
  const AlphaPair cur = alpha[static_cast<std::size_t>(k) * data.n_questions() + q];
  const double a_cur = s == 0 ? cur.a0 : cur.a1;
  const double a_other = s == 0 ? cur.a1 : cur.a0;
  std::int64_t sum_r = 0;
  for (int i = 0; i < data.n_municipalities(); ++i) {
    if (z[i] == k) sum_r += r.at(i, q, s);
  }
  const std::vector<std::int64_t> totals = detail::member_totals(data, z, k, q);

  const GammaParams& prop = config.alpha_component_proposal;
  const double a_prop = rng.gamma(prop.shape, prop.scale);
  const double log_accept = sampler2_log_target(a_prop, a_other, sum_r, totals, hyper) -
                            sampler2_log_target(a_cur, a_other, sum_r, totals, hyper) +
                            sampler2_proposal_logpdf(a_cur, prop) -
                            sampler2_proposal_logpdf(a_prop, prop);
  if (log_accept >= 0.0 || std::log(rng.uniform()) < log_accept) return a_prop;
  return a_cur;
}

void sweep(const VoteTable& data, ModelState& state, AugmentedCounts& r,
           const Hyperparams& hyper, const SweepConfig& config, std::size_t sweep_index,
           Rng& rng) {
  config.validate();
  const int q_count = data.n_questions();
  state.check_consistency(data.n_municipalities(), q_count);

  // z first: birth-death moves between sweeps scatter assignments, and the
  // alpha updates must condition on re-sorted memberships, not the scramble
  state.z = update_z(data, state.alpha, state.eta, rng);

  r = update_augmentation(data, state.z, state.alpha, rng);

  bool use_sampler1 = true;
  switch (config.schedule) {
    case SamplerSchedule::sampler1_only: use_sampler1 = true; break;
    case SamplerSchedule::sampler2_only: use_sampler1 = false; break;
    case SamplerSchedule::alternate: use_sampler1 = sweep_index % 2 == 0; break;
  }
  for (int k = 0; k < state.K; ++k) {
    for (int q = 0; q < q_count; ++q) {
      if (use_sampler1) {
        state.alpha_at(k, q) =
            update_alpha_sampler1(k, q, data, state.z, r, state.alpha, hyper, config, rng);
      } else {
        const double a0 =
            update_alpha_sampler2(k, q, 0, data, state.z, r, state.alpha, hyper, config, rng);
        state.alpha_at(k, q).a0 = a0;
        const double a1 =
            update_alpha_sampler2(k, q, 1, data, state.z, r, state.alpha, hyper, config, rng);
        state.alpha_at(k, q).a1 = a1;
      }
    }
  }

  state.eta = update_eta(state.z, state.K, hyper.gamma, rng);
}

}  // namespace blocinfer
