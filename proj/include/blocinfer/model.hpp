#pragma once

#include "blocinfer/rng.hpp"
#include "blocinfer/types.hpp"

namespace blocinfer {

// log P(yes, no | a0, a1) for the Beta-binomial, computed via log-Gamma.
// Includes the binomial coefficient so reported log-likelihoods are
// comparable across methods.
double log_beta_binomial(const VoteCounts& counts, const AlphaPair& alpha);

// Sum over questions of log_beta_binomial for municipality i under bloc k's
// alpha row. The row pointer spans Q consecutive AlphaPair entries.
double log_bloc_loglik(const VoteTable& data, int i, const AlphaPair* alpha_row);

// Complete-data log-likelihood: sum_i [ log eta_{z_i} + sum_q log BB(c_iq | alpha_{z_i q}) ].
double log_complete_likelihood(const VoteTable& data, const ModelState& state);

// z-marginalized mixture log-likelihood, log prod_i sum_k eta_k prod_q BB(c_iq | alpha_kq),
// evaluated with log-sum-exp. alpha is K x Q row-major with K = eta.size().
double log_marginal_mixture(const VoteTable& data, const std::vector<AlphaPair>& alpha,
                            const std::vector<double>& eta);

// Two independent Gamma(kappa, scale theta) draws.
AlphaPair sample_alpha_prior(const Hyperparams& hyper, Rng& rng);

double log_sum_exp(const std::vector<double>& xs);

}  // namespace blocinfer
