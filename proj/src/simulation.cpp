#include "blocinfer/simulation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

namespace blocinfer {

std::pair<VoteTable, GroundTruth> simulate_dataset(const SimSpec& spec, Rng& rng) {
  spec.validate();
  const int K = spec.k_true;
  VoteTable data;
  data.municipalities.resize(spec.n);
  char buf[32];
  for (int i = 0; i < spec.n; ++i) {
    std::snprintf(buf, sizeof(buf), "m%04d", i + 1);
    data.municipalities[i].id = buf;
    data.municipalities[i].name = buf;
  }
  data.questions.resize(spec.q);
  for (int q = 0; q < spec.q; ++q) {
    std::snprintf(buf, sizeof(buf), "q%03d", q + 1);
    data.questions[q].id = buf;
    data.questions[q].year = 2000 + q;
    data.questions[q].content_tag = "simulated";
  }
  data.counts.assign(static_cast<std::size_t>(spec.n) * spec.q, VoteCounts{});

  GroundTruth truth;
  truth.lambda = Matrix(spec.n, K);
  const std::vector<double> conc(K, spec.delta);
  for (int i = 0; i < spec.n; ++i) {
    const std::vector<double> lam = rng.dirichlet(conc);
    for (int k = 0; k < K; ++k) truth.lambda.at(i, k) = lam[k];
  }
  truth.alpha.resize(static_cast<std::size_t>(K) * spec.q);
  for (AlphaPair& a : truth.alpha) {
    a.a0 = rng.gamma(spec.alpha_gen.shape, spec.alpha_gen.scale);
    a.a1 = rng.gamma(spec.alpha_gen.shape, spec.alpha_gen.scale);
  }

  for (int i = 0; i < spec.n; ++i) {
    std::vector<std::int64_t> voters(K);
    for (int k = 0; k < K; ++k) {
      voters[k] = std::llround(static_cast<double>(spec.c) * truth.lambda.at(i, k));
    }
    for (int q = 0; q < spec.q; ++q) {
      VoteCounts& cell = data.cell(i, q);
      for (int k = 0; k < K; ++k) {
        const AlphaPair& a = truth.alpha[static_cast<std::size_t>(k) * spec.q + q];
        const double p = rng.beta(a.a0, a.a1);
        const std::int64_t yes = rng.binomial(voters[k], p);
        cell.yes += yes;
        cell.no += voters[k] - yes;
      }
    }
  }
  return {std::move(data), std::move(truth)};
}

std::vector<RecoveryResult> recovery_grid(const std::vector<SimSpec>& grid, int replicates,
                                          const Hyperparams& hyper,
                                          const SweepConfig& sweep_config,
                                          const RunConfig& run_config, int min_bloc_size,
                                          int n_threads) {
  if (replicates < 1) throw std::domain_error("recovery_grid: replicates must be >= 1");
  const int n_tasks = static_cast<int>(grid.size()) * replicates;
  std::vector<RecoveryResult> out(n_tasks);

  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= n_tasks) return;
      const int cell = t / replicates;
      const int rep = t % replicates;
      const SimSpec& spec = grid[cell];

      const std::uint64_t task_seed = Rng::splitmix64(
          run_config.seed ^ Rng::splitmix64(static_cast<std::uint64_t>(cell) + 1) ^
          Rng::splitmix64(Rng::splitmix64(static_cast<std::uint64_t>(rep) + 1)));
      Rng sim_rng(task_seed);
      auto [data, truth] = simulate_dataset(spec, sim_rng);

      RunConfig rc = run_config;
      rc.seed = Rng::splitmix64(task_seed);
      rc.chains = 1;
      Rng chain_rng = Rng::stream(rc.seed, 0);
      const std::vector<PosteriorSample> samples =
          run_chain(data, hyper, sweep_config, rc, chain_rng);

      RecoveryResult& res = out[t];
      res.spec = spec;
      res.cell = cell;
      res.replicate = rep;
      res.posterior_k = posterior_K(samples, min_bloc_size);
      res.mode = posterior_mode(res.posterior_k);
      const auto it = res.posterior_k.find(spec.k_true);
      res.mass_at_true = it == res.posterior_k.end() ? 0.0 : it->second;
      res.matched = res.mode == spec.k_true;
    }
  };
  const int workers = std::max(1, std::min(n_threads, n_tasks));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace blocinfer
