#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "blocinfer/bdmcmc.hpp"
#include "blocinfer/types.hpp"

namespace blocinfer {

struct SimSpec {
  int k_true = 3;
  int n = 100;
  int q = 10;
  std::int64_t c = 500;  // voters per municipality
  double delta = 0.1;    // symmetric Dirichlet concentration of the mixtures
  GammaParams alpha_gen{1.0, 20.0};
  std::uint64_t seed = 0;

  void validate() const {
    if (k_true < 1 || n < 1 || q < 1 || c < 1 || !(delta > 0) || !(alpha_gen.shape > 0) ||
        !(alpha_gen.scale > 0)) {
      throw std::domain_error("SimSpec: all fields must be positive");
    }
  }
};

struct GroundTruth {
  Matrix lambda;                 // N x K mixture proportions
  std::vector<AlphaPair> alpha;  // K x Q row-major
};

// Synthetic referendum dataset: per-municipality bloc mixtures from
// Dirichlet(delta), bloc supports from Beta(alpha_kq) with alpha generated
// from alpha_gen, and round(C * lambda_ik) voters per bloc.
std::pair<VoteTable, GroundTruth> simulate_dataset(const SimSpec& spec, Rng& rng);

struct RecoveryResult {
  SimSpec spec;
  int cell = 0;
  int replicate = 0;
  std::map<int, double> posterior_k;
  int mode = 0;
  double mass_at_true = 0.0;
  bool matched = false;
};

// Simulate + infer + posterior_K for every (cell, replicate), in parallel.
// Each task derives its RNG stream from (run_config.seed, cell, replicate).
std::vector<RecoveryResult> recovery_grid(const std::vector<SimSpec>& grid, int replicates,
                                          const Hyperparams& hyper,
                                          const SweepConfig& sweep_config,
                                          const RunConfig& run_config, int min_bloc_size,
                                          int n_threads);

}  // namespace blocinfer
