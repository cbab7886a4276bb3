#include "blocinfer/bdmcmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace blocinfer {

namespace {

constexpr double kLogRateClamp = 700.0;  // exp(700) is near the double limit

double log_poisson_pmf(int k, double lambda) {
  return k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
}

// log xi_k from cached per-(i, k) likelihood sums. Returns -inf for K = 1.
// The likelihood ratio marginalizes the assignments entirely (the mixture
// likelihood with the survivors' eta rescaled); a z-conditional ratio would
// let a single scattered municipality dominate the rate and collapse the
// chain, see the ledger note on the death-rate construction.
double log_death_rate_cached(const VoteTable& data, const ModelState& state, int k,
                             const Hyperparams& hyper, const LogLikCache& cache) {
  const int K = state.K;
  if (K <= 1) return -std::numeric_limits<double>::infinity();
  if (k < 0 || k >= K) throw std::domain_error("death_rate: bloc index out of range");
  if (!(hyper.beta_birth > 0.0)) return -std::numeric_limits<double>::infinity();

  double acc = std::log(hyper.beta_birth);
  acc += log_poisson_pmf(K - 1, hyper.lambda) - std::log(static_cast<double>(K)) -
         log_poisson_pmf(K, hyper.lambda);

  std::vector<double> log_eta(K);
  for (int j = 0; j < K; ++j) log_eta[j] = std::log(state.eta[j]);
  const double log_keep = std::log1p(-state.eta[k]);

  // log Lmix(Theta_{K|k}) - log Lmix(Theta_K), with eta* = eta / (1 - eta_k)
  std::vector<double> full(K), survivors(K - 1);
  for (int i = 0; i < data.n_municipalities(); ++i) {
    int idx = 0;
    for (int j = 0; j < K; ++j) {
      full[j] = log_eta[j] + cache.at(i, j);
      if (j != k) survivors[idx++] = full[j];
    }
    acc += log_sum_exp(survivors) - log_keep - log_sum_exp(full);
  }

  // Occupancy-weighted eta ratio with the survivors rescaled by 1/(1 - eta_k).
  // Empty blocs contribute eta^0 = 1; skipping them keeps 0 * log(0) out.
  const std::vector<int> d = state.bloc_sizes();
  for (int j = 0; j < K; ++j) {
    if (d[j] == 0) continue;
    if (j == k) {
      acc -= d[j] * log_eta[j];
    } else {
      acc -= d[j] * log_keep;
    }
  }
  return acc;
}

}  // namespace

LogLikCache::LogLikCache(const VoteTable& data, const ModelState& state)
    : n_(data.n_municipalities()), K_(state.K) {
  values_.resize(static_cast<std::size_t>(n_) * K_);
  const int q_count = data.n_questions();
  for (int i = 0; i < n_; ++i) {
    for (int k = 0; k < K_; ++k) {
      values_[static_cast<std::size_t>(i) * K_ + k] =
          log_bloc_loglik(data, i, &state.alpha[static_cast<std::size_t>(k) * q_count]);
    }
  }
}

void LogLikCache::append_bloc(const VoteTable& data, const ModelState& state, int k) {
  const int q_count = data.n_questions();
  std::vector<double> next(static_cast<std::size_t>(n_) * (K_ + 1));
  for (int i = 0; i < n_; ++i) {
    std::copy_n(values_.begin() + static_cast<std::size_t>(i) * K_, K_,
                next.begin() + static_cast<std::size_t>(i) * (K_ + 1));
    next[static_cast<std::size_t>(i) * (K_ + 1) + K_] =
        log_bloc_loglik(data, i, &state.alpha[static_cast<std::size_t>(k) * q_count]);
  }
  values_ = std::move(next);
  ++K_;
}

void LogLikCache::remove_bloc(int k) {
  std::vector<double> next(static_cast<std::size_t>(n_) * (K_ - 1));
  for (int i = 0; i < n_; ++i) {
    int idx = 0;
    for (int j = 0; j < K_; ++j) {
      if (j == k) continue;
      next[static_cast<std::size_t>(i) * (K_ - 1) + idx++] =
          values_[static_cast<std::size_t>(i) * K_ + j];
    }
  }
  values_ = std::move(next);
  --K_;
}

double death_rate(const VoteTable& data, const ModelState& state, int k,
                  const Hyperparams& hyper) {
  state.check_consistency(data.n_municipalities(), data.n_questions());
  if (state.K == 1) {
    if (k != 0) throw std::domain_error("death_rate: bloc index out of range");
    return 0.0;
  }
  if (k < 0 || k >= state.K) throw std::domain_error("death_rate: bloc index out of range");
  LogLikCache cache(data, state);
  const double lx = log_death_rate_cached(data, state, k, hyper, cache);
  return std::exp(std::min(lx, kLogRateClamp));
}

ModelState birth_move(const ModelState& state, const Hyperparams& hyper, Rng& rng) {
  if (state.K >= hyper.k_max) {
    throw std::domain_error("birth_move: K already at k_max");
  }
  const int q_count = state.n_questions();
  ModelState next = state;
  next.K = state.K + 1;
  for (int q = 0; q < q_count; ++q) {
    next.alpha.push_back(sample_alpha_prior(hyper, rng));
  }
  double eta_new = rng.uniform();
  eta_new = std::clamp(eta_new, 1e-12, 1.0 - 1e-12);
  for (double& e : next.eta) e *= 1.0 - eta_new;
  next.eta.push_back(eta_new);
  renormalize_eta(next.eta);
  const double p_new = 1.0 / static_cast<double>(next.K);
  for (int& zi : next.z) {
    if (rng.bernoulli(p_new)) zi = next.K - 1;
  }
  return next;
}

ModelState death_move(const ModelState& state, int k, Rng& rng) {
  if (state.K < 2) throw std::domain_error("death_move: cannot remove the last bloc");
  if (k < 0 || k >= state.K) throw std::domain_error("death_move: bloc index out of range");
  const int q_count = state.n_questions();
  ModelState next;
  next.K = state.K - 1;
  next.eta.reserve(next.K);
  const double keep = 1.0 - state.eta[k];
  for (int j = 0; j < state.K; ++j) {
    if (j != k) next.eta.push_back(state.eta[j] / keep);
  }
  renormalize_eta(next.eta);
  next.alpha.reserve(static_cast<std::size_t>(next.K) * q_count);
  for (int j = 0; j < state.K; ++j) {
    if (j == k) continue;
    for (int q = 0; q < q_count; ++q) {
      next.alpha.push_back(state.alpha_at(j, q));
    }
  }
  next.z.resize(state.z.size());
  for (std::size_t i = 0; i < state.z.size(); ++i) {
    const int zi = state.z[i];
    if (zi == k) {
      next.z[i] = rng.uniform_int(0, next.K - 1);
    } else {
      next.z[i] = zi > k ? zi - 1 : zi;
    }
  }
  return next;
}

BdResult bd_process(const VoteTable& data, ModelState& state, const Hyperparams& hyper,
                    double duration, Rng& rng) {
  if (!(duration > 0)) throw std::domain_error("bd_process: duration must be > 0");
  hyper.validate();
  BdResult out;
  LogLikCache cache(data, state);
  double t = 0.0;
  double last_change = 0.0;
  std::vector<double> rates;
  for (;;) {
    rates.assign(state.K, 0.0);
    double total_death = 0.0;
    if (state.K > 1) {
      for (int k = 0; k < state.K; ++k) {
        const double lx = log_death_rate_cached(data, state, k, hyper, cache);
        double x = std::exp(std::min(lx, kLogRateClamp));
        if (lx > kLogRateClamp) ++out.diag.clamped_rates;
        rates[k] = x;
        total_death += x;
      }
    }
    const double total = hyper.beta_birth + total_death;
    if (!(total > 0.0) || !std::isfinite(total)) break;

    double wait = rng.exponential(1.0 / total);
    const double cap = 1e6 / total;
    if (wait > cap) {
      wait = cap;
      ++out.diag.capped_waits;
    }
    if (t + wait >= duration) break;
    t += wait;

    const bool birth = rng.bernoulli(hyper.beta_birth / total);
    if (birth) {
      if (state.K >= hyper.k_max) {
        ++out.diag.rejected_births;  // no-op; clock advanced but K unchanged
        continue;
      }
      state = birth_move(state, hyper, rng);
      cache.append_bloc(data, state, state.K - 1);
      ++out.diag.births;
    } else {
      // choose the dying bloc proportional to its rate
      double u = rng.uniform() * total_death;
      int k = 0;
      double acc = rates[0];
      while (k + 1 < state.K && u >= acc) acc += rates[++k];
      state = death_move(state, k, rng);
      cache.remove_bloc(k);
      ++out.diag.deaths;
    }
    ++out.diag.events;
    out.events.push_back(BdEvent{t - last_change, state.K, birth});
    last_change = t;
  }
  out.final_hold = duration - last_change;
  return out;
}

ModelState initial_state(const VoteTable& data, const Hyperparams& hyper, Rng& rng) {
  hyper.validate();
  ModelState state;
  state.K = rng.poisson_truncated(hyper.lambda, 1, hyper.k_max);
  state.eta = update_eta({}, state.K, hyper.gamma, rng);
  state.z.resize(data.n_municipalities());
  std::vector<double> log_eta(state.K);
  for (int k = 0; k < state.K; ++k) log_eta[k] = std::log(state.eta[k]);
  for (int& zi : state.z) {
    zi = state.K == 1 ? 0 : rng.categorical_from_log(log_eta);
  }
  state.alpha.reserve(static_cast<std::size_t>(state.K) * data.n_questions());
  for (int k = 0; k < state.K; ++k) {
    for (int q = 0; q < data.n_questions(); ++q) {
      state.alpha.push_back(sample_alpha_prior(hyper, rng));
    }
  }
  return state;
}

std::vector<PosteriorSample> run_chain(const VoteTable& data, const Hyperparams& hyper,
                                       const SweepConfig& sweep_config,
                                       const RunConfig& run_config, Rng& rng,
                                       BdDiagnostics* diag) {
  run_config.validate();
  sweep_config.validate();
  hyper.validate();
  ModelState state = initial_state(data, hyper, rng);
  AugmentedCounts r(data.n_municipalities(), data.n_questions());
  // conditioning sweeps at the initial K before any birth-death pruning:
  // prior-drawn blocs are indistinguishable junk, and rates evaluated on
  // them prune needed blocs before the data can claim them
  for (std::int64_t warm = 0; warm < run_config.conditioning_sweeps; ++warm) {
    sweep(data, state, r, hyper, sweep_config, static_cast<std::size_t>(warm), rng);
  }
  std::vector<PosteriorSample> samples;
  for (std::int64_t iter = 0; iter < run_config.iterations; ++iter) {
    BdResult bd = bd_process(data, state, hyper, run_config.bd_time, rng);
    if (diag) diag->merge(bd.diag);
    sweep(data, state, r, hyper, sweep_config, static_cast<std::size_t>(iter), rng);
    if (iter >= run_config.burn_in && (iter - run_config.burn_in) % run_config.thin == 0) {
      samples.push_back(PosteriorSample{state, bd.final_hold, iter});
    }
  }
  return samples;
}

std::vector<std::vector<PosteriorSample>> run_chains(const VoteTable& data,
                                                     const Hyperparams& hyper,
                                                     const SweepConfig& sweep_config,
                                                     const RunConfig& run_config, int n_threads,
                                                     std::vector<BdDiagnostics>* diags) {
  run_config.validate();
  const int chains = run_config.chains;
  std::vector<std::vector<PosteriorSample>> out(chains);
  std::vector<BdDiagnostics> chain_diags(chains);
  const int workers = std::max(1, std::min(n_threads, chains));

  std::atomic<int> next_chain{0};
  auto work = [&]() {
    for (;;) {
      const int c = next_chain.fetch_add(1);
      if (c >= chains) return;
      Rng rng = Rng::stream(run_config.seed, static_cast<std::uint64_t>(c));
      out[c] = run_chain(data, hyper, sweep_config, run_config, rng, &chain_diags[c]);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (diags) *diags = std::move(chain_diags);
  return out;
}

std::map<int, double> posterior_K(const std::vector<PosteriorSample>& samples,
                                  int min_bloc_size) {
  if (samples.empty()) throw std::domain_error("posterior_K: no samples");
  if (min_bloc_size < 0) throw std::domain_error("posterior_K: min_bloc_size must be >= 0");
  std::map<int, double> mass;
  double total = 0.0;
  for (const PosteriorSample& s : samples) {
    const std::vector<int> d = s.state.bloc_sizes();
    int effective = 0;
    for (int dk : d) {
      if (dk >= min_bloc_size) ++effective;
    }
    effective = std::max(effective, 1);
    mass[effective] += s.wait_time;
    total += s.wait_time;
  }
  for (auto& [k, m] : mass) m /= total;
  return mass;
}

int posterior_mode(const std::map<int, double>& dist) {
  int best_k = 0;
  double best = -1.0;
  for (const auto& [k, m] : dist) {
    if (m > best) {
      best = m;
      best_k = k;
    }
  }
  return best_k;
}

}  // namespace blocinfer
