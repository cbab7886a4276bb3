#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "blocinfer/samplers.hpp"

namespace blocinfer {

// A retained snapshot of the chain plus the BD holding time that weights it.
struct PosteriorSample {
  ModelState state;
  double wait_time = 0.0;  // virtual time units
  std::int64_t iteration = 0;
};

struct RunConfig {
  std::int64_t iterations = 20000;
  std::int64_t burn_in = 5000;
  std::int64_t thin = 10;
  double bd_time = 1.0;  // BD process duration s per iteration
  std::uint64_t seed = 0;
  int chains = 1;
  // fixed-K sweeps run at the initial state before the hybrid loop; blocs
  // must specialize before birth-death pruning can judge them
  std::int64_t conditioning_sweeps = 100;

  void validate() const {
    if (iterations <= burn_in || burn_in < 0 || thin < 1 || chains < 1 || !(bd_time > 0) ||
        conditioning_sweeps < 0) {
      throw std::domain_error("RunConfig: need iterations > burn_in >= 0, thin >= 1, chains >= 1");
    }
  }
};

struct BdDiagnostics {
  std::int64_t events = 0;
  std::int64_t births = 0;
  std::int64_t deaths = 0;
  std::int64_t rejected_births = 0;  // birth drawn at K = k_max
  std::int64_t capped_waits = 0;
  std::int64_t clamped_rates = 0;

  void merge(const BdDiagnostics& other) {
    events += other.events;
    births += other.births;
    deaths += other.deaths;
    rejected_births += other.rejected_births;
    capped_waits += other.capped_waits;
    clamped_rates += other.clamped_rates;
  }
};

struct BdEvent {
  double wait = 0.0;  // holding time before this event
  int k_after = 0;
  bool birth = false;
};

struct BdResult {
  std::vector<BdEvent> events;
  double final_hold = 0.0;  // time from the last K change to the end of the interval
  BdDiagnostics diag;
};

// Cache of per-(i, k) log-likelihood sums sum_q log BB(c_iq | alpha_kq).
// Columns depend only on alpha, so z changes never invalidate them.
class LogLikCache {
 public:
  LogLikCache(const VoteTable& data, const ModelState& state);

  void append_bloc(const VoteTable& data, const ModelState& state, int k);
  void remove_bloc(int k);

  double at(int i, int k) const { return values_[static_cast<std::size_t>(i) * K_ + k]; }
  int n() const { return n_; }
  int blocs() const { return K_; }

 private:
  int n_ = 0;
  int K_ = 0;
  std::vector<double> values_;
};

// Death rate xi_k per the BD construction: birth rate times the Poisson
// prior ratio Poisson(K-1 | lambda) / (K Poisson(K | lambda)), the
// likelihood ratio with bloc k's municipalities marginalized uniformly over
// the survivors, and the occupancy-weighted eta ratio. Zero when K = 1.
double death_rate(const VoteTable& data, const ModelState& state, int k,
                  const Hyperparams& hyper);

// Adds a prior-drawn bloc: new alpha column, eta' ~ U[0,1] stick break, and
// each municipality reassigned to the new bloc with probability 1/(K+1).
ModelState birth_move(const ModelState& state, const Hyperparams& hyper, Rng& rng);

// Removes bloc k, reassigning its municipalities uniformly over the rest and
// rescaling eta by 1/(1 - eta_k). Throws for K = 1.
ModelState death_move(const ModelState& state, int k, Rng& rng);

// Runs the continuous-time birth-death process for the given duration,
// mutating the state in place.
BdResult bd_process(const VoteTable& data, ModelState& state, const Hyperparams& hyper,
                    double duration, Rng& rng);

// Draws the initial chain state from the generative prior.
ModelState initial_state(const VoteTable& data, const Hyperparams& hyper, Rng& rng);

// Hybrid BD-MCMC: alternates bd_process for bd_time with one fixed-K sweep,
// recording thinned post-burn-in snapshots.
std::vector<PosteriorSample> run_chain(const VoteTable& data, const Hyperparams& hyper,
                                       const SweepConfig& sweep_config,
                                       const RunConfig& run_config, Rng& rng,
                                       BdDiagnostics* diag = nullptr);

// Independent chains with streams derived from run_config.seed by chain
// index, executed on up to n_threads workers.
std::vector<std::vector<PosteriorSample>> run_chains(const VoteTable& data,
                                                     const Hyperparams& hyper,
                                                     const SweepConfig& sweep_config,
                                                     const RunConfig& run_config, int n_threads,
                                                     std::vector<BdDiagnostics>* diags = nullptr);

// Wait-time-weighted distribution of the effective K (blocs holding at least
// min_bloc_size municipalities, floored at 1).
std::map<int, double> posterior_K(const std::vector<PosteriorSample>& samples,
                                  int min_bloc_size);

// Mode of a posterior_K map; ties resolve to the smaller K.
int posterior_mode(const std::map<int, double>& dist);

}  // namespace blocinfer
