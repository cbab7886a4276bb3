#pragma once

#include <cstdint>
#include <vector>

#include "blocinfer/model.hpp"
#include "blocinfer/rng.hpp"
#include "blocinfer/types.hpp"

namespace blocinfer {

enum class SamplerSchedule { sampler1_only, sampler2_only, alternate };

struct SweepConfig {
  // Sampler 1: multiplicative random walk on alpha_total. The configured
  // Gamma multiplier is rescaled to unit mean so the walk stays centered
  // on the current value.
  GammaParams alpha_total_proposal{1.0, 1.0 / 20.0};
  // Sampler 2: independence Gamma proposal for a single alpha component.
  GammaParams alpha_component_proposal{1.0, 20.0};
  SamplerSchedule schedule = SamplerSchedule::alternate;

  void validate() const {
    if (!(alpha_total_proposal.shape > 0) || !(alpha_total_proposal.scale > 0) ||
        !(alpha_component_proposal.shape > 0) || !(alpha_component_proposal.scale > 0)) {
      throw std::domain_error("SweepConfig: proposal shapes/scales must be > 0");
    }
  }
};

// eta | z ~ Dirichlet(d_K + gamma_K) with d_k the bloc occupancy counts.
std::vector<double> update_eta(const std::vector<int>& z, int K, double gamma, Rng& rng);

// z_i | . ~ Categorical over k of eta_k * prod_q BB(c_iq | alpha_kq).
std::vector<int> update_z(const VoteTable& data, const std::vector<AlphaPair>& alpha,
                          const std::vector<double>& eta, Rng& rng);

// Stein-Meng augmentation: r_iqs = sum_{m=1..c_iqs} Bernoulli(a / (a + m - 1))
// with a = alpha_{z_i, q, s}.
AugmentedCounts update_augmentation(const VoteTable& data, const std::vector<int>& z,
                                    const std::vector<AlphaPair>& alpha, Rng& rng);

// --- Sampler 1: (alpha_total, p) parameterization -------------------------

// Unnormalized log target for alpha_total given the augmentation:
//   Gamma(t | 2 kappa, theta) * t^{sum_r} * prod_members Gamma(t) / Gamma(t + n_i)
// member_totals holds n_iq = yes + no for municipalities assigned to the bloc.
double sampler1_log_target(double t, std::int64_t sum_r_total,
                           const std::vector<std::int64_t>& member_totals,
                           const Hyperparams& hyper);

// log q(from -> to) for the unit-mean multiplicative Gamma walk.
double sampler1_proposal_logpdf(double from, double to, const GammaParams& prop);

// MH step on alpha_total plus exact conjugate draw of p; returns the new pair.
AlphaPair update_alpha_sampler1(int k, int q, const VoteTable& data, const std::vector<int>& z,
                                const AugmentedCounts& r, const std::vector<AlphaPair>& alpha,
                                const Hyperparams& hyper, const SweepConfig& config, Rng& rng);

// --- Sampler 2: single-component updates -----------------------------------

// Unnormalized log target for one component a given the other component:
//   Gamma(a | kappa + sum_r_s, theta) * Gamma(a + other)^{n_members}
//     / prod_members Gamma(a + other + n_i)
double sampler2_log_target(double a, double a_other, std::int64_t sum_r_s,
                           const std::vector<std::int64_t>& member_totals,
                           const Hyperparams& hyper);

double sampler2_proposal_logpdf(double to, const GammaParams& prop);

// Independence-proposal MH step on alpha_{kqs}; returns the new component.
double update_alpha_sampler2(int k, int q, int s, const VoteTable& data,
                             const std::vector<int>& z, const AugmentedCounts& r,
                             const std::vector<AlphaPair>& alpha, const Hyperparams& hyper,
                             const SweepConfig& config, Rng& rng);

// One full fixed-K iteration: z, augmentation, alpha for all (k, q), eta.
// sweep_index selects the sampler when the schedule alternates.
void sweep(const VoteTable& data, ModelState& state, AugmentedCounts& r,
           const Hyperparams& hyper, const SweepConfig& config, std::size_t sweep_index,
           Rng& rng);

// Renormalizes eta in place when accumulated drift exceeds 1e-10.
void renormalize_eta(std::vector<double>& eta);

namespace detail {
double log_gamma_pdf(double x, double shape, double scale);
std::vector<std::int64_t> member_totals(const VoteTable& data, const std::vector<int>& z,
                                        int k, int q);
}  // namespace detail

}  // namespace blocinfer
