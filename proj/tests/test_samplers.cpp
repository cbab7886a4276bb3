#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "blocinfer/samplers.hpp"
#include "support.hpp"

using namespace blocinfer;
using testsupport::batch_mean;
using testsupport::make_table;

TEST_CASE("update_eta: Dirichlet(d + gamma) moments") {
  Rng rng(42);
  const std::vector<int> z = {0, 0, 1, 1, 1};  // d = (2, 3)
  const int n = 100000;
  double sum0 = 0.0, sumsq0 = 0.0;
  for (int t = 0; t < n; ++t) {
    const std::vector<double> eta = update_eta(z, 2, 1.0, rng);
    REQUIRE(eta.size() == 2);
    CHECK(eta[0] + eta[1] == doctest::Approx(1.0).epsilon(1e-12));
    sum0 += eta[0];
    sumsq0 += eta[0] * eta[0];
  }
  // Dirichlet(3, 4): E = 3/7, Var = 3*4 / (49 * 8)
  const double mean = sum0 / n;
  const double var = sumsq0 / n - mean * mean;
  const double exp_mean = 3.0 / 7.0;
  const double exp_var = 12.0 / (49.0 * 8.0);
  CHECK(std::abs(mean - exp_mean) < 3.0 * std::sqrt(exp_var / n));
  CHECK(var == doctest::Approx(exp_var).epsilon(0.05));
}

TEST_CASE("update_eta: K=1 is the point mass") {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> eta = update_eta({0, 0, 0}, 1, 1.0, rng);
    CHECK(eta == std::vector<double>{1.0});
  }
}

TEST_CASE("update_eta: empty assignment recovers the prior") {
  Rng rng(7);
  const int n = 100000;
  double sum = 0.0;
  for (int t = 0; t < n; ++t) {
    sum += update_eta({}, 3, 1.0, rng)[0];
  }
  // Dirichlet(1,1,1) marginal: Beta(1,2), mean 1/3
  const double exp_var = 2.0 / (9.0 * 4.0);
  CHECK(std::abs(sum / n - 1.0 / 3.0) < 3.0 * std::sqrt(exp_var / n));
}

TEST_CASE("update_z: identical components sample from eta") {
  const VoteTable data = make_table(1, 1, {{5, 5}});
  const std::vector<AlphaPair> alpha = {{2.0, 3.0}, {2.0, 3.0}, {2.0, 3.0}};
  const std::vector<double> eta = {0.2, 0.3, 0.5};
  Rng rng(5150);
  const int n = 100000;
  std::vector<int> freq(3, 0);
  for (int t = 0; t < n; ++t) freq[update_z(data, alpha, eta, rng)[0]]++;
  double chi2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double expected = eta[k] * n;
    chi2 += (freq[k] - expected) * (freq[k] - expected) / expected;
  }
  CHECK(chi2 < 13.82);  // chi-square_{0.999, df=2}
}

TEST_CASE("update_z: K=1 is deterministic") {
  const VoteTable data = make_table(2, 1, {{3, 1}, {0, 4}});
  Rng rng(3);
  const std::vector<int> z = update_z(data, {{1.0, 1.0}}, {1.0}, rng);
  CHECK(z == std::vector<int>{0, 0});
}

TEST_CASE("update_z: frequencies match the normalized categorical weights") {
  const VoteTable data = make_table(3, 1, {{8, 2}, {5, 5}, {1, 9}});
  const std::vector<AlphaPair> alpha = {{6.0, 2.0}, {2.0, 6.0}};
  const std::vector<double> eta = {0.4, 0.6};
  Rng rng(99);
  const int n = 100000;
  Matrix freq(3, 2);
  for (int t = 0; t < n; ++t) {
    const std::vector<int> z = update_z(data, alpha, eta, rng);
    for (int i = 0; i < 3; ++i) freq.at(i, z[i]) += 1.0;
  }
  for (int i = 0; i < 3; ++i) {
    std::vector<double> logw(2);
    for (int k = 0; k < 2; ++k) {
      logw[k] = std::log(eta[k]) + log_beta_binomial(data.cell(i, 0), alpha[k]);
    }
    const double p0 = std::exp(logw[0] - log_sum_exp(logw));
    CHECK(std::abs(freq.at(i, 0) / n - p0) < 0.01);
  }
}

TEST_CASE("update_augmentation: bounds and edge cases") {
  const VoteTable data = make_table(2, 2, {{0, 1}, {3, 0}, {7, 2}, {1, 1}});
  const std::vector<AlphaPair> alpha = {{0.5, 4.0}};
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const AugmentedCounts r = update_augmentation(data, {0, 0}, alpha, rng);
    for (int i = 0; i < 2; ++i) {
      for (int q = 0; q < 2; ++q) {
        const VoteCounts& c = data.cell(i, q);
        for (int s = 0; s < 2; ++s) {
          const std::int64_t count = s == 0 ? c.yes : c.no;
          const std::int64_t got = r.at(i, q, s);
          CHECK(got >= (count >= 1 ? 1 : 0));
          CHECK(got <= count);
        }
      }
    }
    // c = 1 always yields r = 1
    CHECK(r.at(0, 0, 1) == 1);
    CHECK(r.at(1, 1, 0) == 1);
    CHECK(r.at(1, 1, 1) == 1);
    // c = 0 always yields r = 0
    CHECK(r.at(0, 0, 0) == 0);
    CHECK(r.at(0, 1, 1) == 0);
  }
}

TEST_CASE("update_augmentation: c=3, alpha=1 has mean 11/6") {
  const VoteTable data = make_table(1, 1, {{3, 0}});
  const std::vector<AlphaPair> alpha = {{1.0, 1.0}};
  Rng rng(2024);
  const int n = 100000;
  double sum = 0.0;
  for (int t = 0; t < n; ++t) {
    sum += static_cast<double>(update_augmentation(data, {0}, alpha, rng).at(0, 0, 0));
  }
  CHECK(std::abs(sum / n - 11.0 / 6.0) < 0.01);
}

// --- sampler 1 ---------------------------------------------------------------

TEST_CASE("sampler 1: MH acceptance ratio is antisymmetric") {
  Rng rng(31);
  const Hyperparams hyper;
  const GammaParams prop{1.0, 1.0 / 20.0};
  const std::vector<std::int64_t> totals = {20, 14, 3};
  for (int t = 0; t < 200; ++t) {
    const double a = rng.gamma(2.0, 10.0);
    const double b = rng.gamma(2.0, 10.0);
    const auto log_accept = [&](double cur, double nxt) {
      return sampler1_log_target(nxt, 9, totals, hyper) -
             sampler1_log_target(cur, 9, totals, hyper) +
             sampler1_proposal_logpdf(nxt, cur, prop) - sampler1_proposal_logpdf(cur, nxt, prop);
    };
    CHECK(log_accept(a, b) + log_accept(b, a) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("sampler 1: empty bloc recovers Gamma(2 kappa, theta) and Beta(kappa, kappa)") {
  const VoteTable data = make_table(1, 1, {{6, 4}});
  const std::vector<int> z = {1};  // bloc 0 stays empty
  const Hyperparams hyper;
  const SweepConfig config;
  AugmentedCounts r(1, 1);
  Rng rng(8675309);
  std::vector<AlphaPair> alpha = {{5.0, 5.0}, {1.0, 1.0}};
  const int n = 200000;
  std::vector<double> totals, splits;
  totals.reserve(n);
  splits.reserve(n);
  for (int t = 0; t < n; ++t) {
    alpha[0] = update_alpha_sampler1(0, 0, data, z, r, alpha, hyper, config, rng);
    totals.push_back(alpha[0].total());
    splits.push_back(alpha[0].mean_support());
  }
  const auto m = batch_mean(totals);
  CHECK(std::abs(m.mean - 20.0) < 3.0 * m.se);  // Gamma(2, 10) mean
  const auto s = batch_mean(splits);
  CHECK(std::abs(s.mean - 0.5) < 3.0 * s.se);  // Beta(1, 1) mean
}

TEST_CASE("sampler 1: p-draw is the exact Beta(kappa + r0, kappa + r1) conjugate") {
  const VoteTable data = make_table(1, 1, {{10, 10}});
  const std::vector<int> z = {0};
  const Hyperparams hyper;
  const SweepConfig config;
  AugmentedCounts r(1, 1);
  r.at(0, 0, 0) = 5;
  r.at(0, 0, 1) = 5;
  Rng rng(17);
  std::vector<AlphaPair> alpha = {{5.0, 5.0}};
  const int n = 20000;
  double sum = 0.0;
  for (int t = 0; t < n; ++t) {
    alpha[0] = update_alpha_sampler1(0, 0, data, z, r, alpha, hyper, config, rng);
    sum += alpha[0].mean_support();
  }
  // Beta(6, 6): mean 0.5, sd 0.1387
  CHECK(std::abs(sum / n - 0.5) < 4.0 * 0.1387 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sampler 1: stationary alpha_total density matches the grid-evaluated target") {
  // one municipality, c = (10, 10), augmentation fixed at r = (3, 2)
  const VoteTable data = make_table(1, 1, {{10, 10}});
  const std::vector<int> z = {0};
  const Hyperparams hyper;
  const SweepConfig config;
  AugmentedCounts r(1, 1);
  r.at(0, 0, 0) = 3;
  r.at(0, 0, 1) = 2;
  const std::vector<std::int64_t> totals = {20};

  Rng rng(271828);
  std::vector<AlphaPair> alpha = {{5.0, 5.0}};
  const int iters = 400000;
  const double hi = 60.0;
  const int bins = 12;
  std::vector<double> counts(bins, 0.0);
  int kept = 0;
  for (int t = 0; t < iters; ++t) {
    alpha[0] = update_alpha_sampler1(0, 0, data, z, r, alpha, hyper, config, rng);
    const double v = alpha[0].total();
    if (v < hi) {
      counts[static_cast<int>(v / hi * bins)] += 1.0;
      ++kept;
    }
  }

  // normalized target mass per bin via a fine midpoint grid
  const int grid_n = 24000;
  std::vector<double> dens(grid_n);
  for (int g = 0; g < grid_n; ++g) {
    const double x = (g + 0.5) * hi / grid_n;
    dens[g] = std::exp(sampler1_log_target(x, 5, totals, hyper));
  }
  const double norm = std::accumulate(dens.begin(), dens.end(), 0.0);
  std::vector<double> expected(bins, 0.0);
  for (int g = 0; g < grid_n; ++g) expected[g * bins / grid_n] += dens[g] / norm;

  for (int b = 0; b < bins; ++b) {
    CHECK(std::abs(counts[b] / kept - expected[b]) < 0.02);
  }
}

// --- sampler 2 ---------------------------------------------------------------

TEST_CASE("sampler 2: identity proposal has acceptance ratio one") {
  const Hyperparams hyper;
  const GammaParams prop{1.0, 20.0};
  const std::vector<std::int64_t> totals = {5};
  const double a = 3.7;
  const double ratio = sampler2_log_target(a, 4.0, 2, totals, hyper) -
                       sampler2_log_target(a, 4.0, 2, totals, hyper) +
                       sampler2_proposal_logpdf(a, prop) - sampler2_proposal_logpdf(a, prop);
  CHECK(ratio == 0.0);
}

TEST_CASE("sampler 2: MH acceptance ratio is antisymmetric") {
  Rng rng(32);
  const Hyperparams hyper;
  const GammaParams prop{1.0, 20.0};
  const std::vector<std::int64_t> totals = {12, 9};
  for (int t = 0; t < 200; ++t) {
    const double a = rng.gamma(1.0, 10.0);
    const double b = rng.gamma(1.0, 10.0);
    const auto log_accept = [&](double cur, double nxt) {
      return sampler2_log_target(nxt, 2.5, 4, totals, hyper) -
             sampler2_log_target(cur, 2.5, 4, totals, hyper) +
             sampler2_proposal_logpdf(cur, prop) - sampler2_proposal_logpdf(nxt, prop);
    };
    CHECK(log_accept(a, b) + log_accept(b, a) == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("sampler 2: empty bloc recovers the Gamma(kappa, theta) prior") {
  const VoteTable data = make_table(1, 1, {{6, 4}});
  const std::vector<int> z = {1};
  const Hyperparams hyper;
  const SweepConfig config;
  AugmentedCounts r(1, 1);
  Rng rng(40490);
  std::vector<AlphaPair> alpha = {{5.0, 5.0}, {1.0, 1.0}};
  const int n = 200000;
  std::vector<double> values;
  values.reserve(n);
  for (int t = 0; t < n; ++t) {
    alpha[0].a0 = update_alpha_sampler2(0, 0, 0, data, z, r, alpha, hyper, config, rng);
    values.push_back(alpha[0].a0);
  }
  const auto m = batch_mean(values);
  CHECK(std::abs(m.mean - 10.0) < 3.0 * m.se);  // Gamma(1, 10) mean
}

TEST_CASE("sampler 2: stationary density matches the grid-evaluated conditional") {
  // one municipality, c = (3, 2), fixed other component, r fixed at (2, 1)
  const VoteTable data = make_table(1, 1, {{3, 2}});
  const std::vector<int> z = {0};
  const Hyperparams hyper;
  const SweepConfig config;
  AugmentedCounts r(1, 1);
  r.at(0, 0, 0) = 2;
  r.at(0, 0, 1) = 1;
  const double other = 4.0;
  const std::vector<std::int64_t> totals = {5};

  Rng rng(16180);
  std::vector<AlphaPair> alpha = {{5.0, other}};
  const int iters = 400000;
  const double hi = 80.0;
  const int bins = 12;
  std::vector<double> counts(bins, 0.0);
  int kept = 0;
  for (int t = 0; t < iters; ++t) {
    alpha[0].a0 = update_alpha_sampler2(0, 0, 0, data, z, r, alpha, hyper, config, rng);
    if (alpha[0].a0 < hi) {
      counts[static_cast<int>(alpha[0].a0 / hi * bins)] += 1.0;
      ++kept;
    }
  }

  const int grid_n = 32000;
  std::vector<double> dens(grid_n);
  for (int g = 0; g < grid_n; ++g) {
    const double x = (g + 0.5) * hi / grid_n;
    dens[g] = std::exp(sampler2_log_target(x, other, 2, totals, hyper));
  }
  const double norm = std::accumulate(dens.begin(), dens.end(), 0.0);
  std::vector<double> expected(bins, 0.0);
  for (int g = 0; g < grid_n; ++g) expected[g * bins / grid_n] += dens[g] / norm;

  for (int b = 0; b < bins; ++b) {
    CHECK(std::abs(counts[b] / kept - expected[b]) < 0.02);
  }
}

// --- sweep -------------------------------------------------------------------

namespace {

ModelState two_bloc_state(int n, int q, Rng& rng, const Hyperparams& hyper) {
  ModelState s;
  s.K = 2;
  s.eta = {0.5, 0.5};
  s.z.resize(n);
  for (int i = 0; i < n; ++i) s.z[i] = i % 2;
  s.alpha.resize(2 * static_cast<std::size_t>(q));
  for (AlphaPair& a : s.alpha) a = sample_alpha_prior(hyper, rng);
  return s;
}

}  // namespace

TEST_CASE("sweep: K=1 keeps eta at one and preserves invariants") {
  const VoteTable data = make_table(2, 1, {{5, 5}, {5, 5}});
  const Hyperparams hyper;
  const SweepConfig config;
  ModelState s;
  s.K = 1;
  s.eta = {1.0};
  s.z = {0, 0};
  s.alpha = {{2.0, 2.0}};
  AugmentedCounts r;
  Rng rng(64);
  for (std::size_t t = 0; t < 50; ++t) {
    sweep(data, s, r, hyper, config, t, rng);
    CHECK(s.eta == std::vector<double>{1.0});
    CHECK(s.z == std::vector<int>{0, 0});
    s.check_consistency(2, 1);
  }
}

TEST_CASE("sweep: simplex, z-range, and augmentation bounds hold across sweeps") {
  Rng rng(1001);
  const int n = 8, q = 2;
  std::vector<VoteCounts> counts(static_cast<std::size_t>(n) * q);
  for (VoteCounts& c : counts) c = {rng.uniform_int(0, 30), rng.uniform_int(0, 30)};
  const VoteTable data = make_table(n, q, counts);
  const Hyperparams hyper;
  SweepConfig config;
  config.schedule = SamplerSchedule::alternate;
  ModelState s = two_bloc_state(n, q, rng, hyper);
  AugmentedCounts r;
  for (std::size_t t = 0; t < 300; ++t) {
    sweep(data, s, r, hyper, config, t, rng);
    double sum = 0.0;
    for (double e : s.eta) sum += e;
    CHECK(std::abs(sum - 1.0) <= 1e-10);
    s.check_consistency(n, q);
    for (int i = 0; i < n; ++i) {
      for (int qq = 0; qq < q; ++qq) {
        for (int ss = 0; ss < 2; ++ss) {
          const std::int64_t c = ss == 0 ? data.cell(i, qq).yes : data.cell(i, qq).no;
          CHECK(r.at(i, qq, ss) <= c);
          CHECK(r.at(i, qq, ss) >= (c >= 1 ? 1 : 0));
        }
      }
    }
  }
}

TEST_CASE("sweep: prior-only run (Q=0) recovers Dirichlet moments for eta") {
  const VoteTable data = make_table(3, 0, {});
  const Hyperparams hyper;
  const SweepConfig config;
  ModelState s;
  s.K = 2;
  s.eta = {0.9, 0.1};
  s.z = {0, 0, 0};
  AugmentedCounts r;
  Rng rng(555);
  const int iters = 100000;
  std::vector<double> eta0;
  eta0.reserve(iters);
  for (int t = 0; t < iters; ++t) {
    sweep(data, s, r, hyper, config, static_cast<std::size_t>(t), rng);
    eta0.push_back(s.eta[0]);
  }
  const auto m = batch_mean(eta0);
  CHECK(std::abs(m.mean - 0.5) < 3.0 * m.se);  // Dirichlet(1,1) marginal mean
  double var = 0.0;
  for (double e : eta0) var += (e - m.mean) * (e - m.mean);
  var /= static_cast<double>(eta0.size());
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.05));
}

TEST_CASE("sweep: multi-chain Gelman-Rubin on the likelihood trace") {
  // two well-separated groups, K = 2 fixed
  std::vector<VoteCounts> counts;
  for (int i = 0; i < 12; ++i) {
    for (int q = 0; q < 3; ++q) {
      counts.push_back(i < 6 ? VoteCounts{40, 10} : VoteCounts{12, 38});
    }
  }
  const VoteTable data = make_table(12, 3, counts);
  const Hyperparams hyper;
  const SweepConfig config;

  std::vector<std::vector<double>> traces;
  for (int chain = 0; chain < 4; ++chain) {
    Rng rng(9000 + 13 * chain);
    ModelState s = two_bloc_state(12, 3, rng, hyper);
    AugmentedCounts r;
    std::vector<double> trace;
    for (std::size_t t = 0; t < 3000; ++t) {
      sweep(data, s, r, hyper, config, t, rng);
      if (t >= 1000) trace.push_back(log_complete_likelihood(data, s));
    }
    traces.push_back(std::move(trace));
  }
  CHECK(testsupport::gelman_rubin(traces) < 1.1);
}

TEST_CASE("sweep: Geweke-style successive-conditional test reproduces prior moments") {
  // alternate (data | state) and (state | data) on a tiny model; the
  // stationary marginals of the state are the prior
  const int n = 4, q = 2;
  const std::int64_t total = 20;
  const Hyperparams hyper;
  SweepConfig config;
  config.schedule = SamplerSchedule::alternate;
  Rng rng(246);

  VoteTable data = make_table(n, q, std::vector<VoteCounts>(static_cast<std::size_t>(n) * q, {10, 10}));
  ModelState s = two_bloc_state(n, q, rng, hyper);
  s.eta = update_eta({}, 2, hyper.gamma, rng);
  AugmentedCounts r;

  const int iters = 200000;
  std::vector<double> alpha_totals, eta0;
  alpha_totals.reserve(iters);
  eta0.reserve(iters);
  for (int t = 0; t < iters; ++t) {
    // data | state
    for (int i = 0; i < n; ++i) {
      for (int qq = 0; qq < q; ++qq) {
        const AlphaPair& a = s.alpha_at(s.z[i], qq);
        const double p = rng.beta(a.a0, a.a1);
        const std::int64_t yes = rng.binomial(total, p);
        data.cell(i, qq) = {yes, total - yes};
      }
    }
    // state | data
    sweep(data, s, r, hyper, config, static_cast<std::size_t>(t), rng);
    alpha_totals.push_back(s.alpha_at(0, 0).total());
    eta0.push_back(s.eta[0]);
  }
  const auto ma = batch_mean(alpha_totals);
  CHECK(std::abs(ma.mean - 2.0 * hyper.kappa * hyper.theta) < 3.0 * ma.se);
  const auto me = batch_mean(eta0);
  CHECK(std::abs(me.mean - 0.5) < 3.0 * me.se);
}

TEST_CASE("sweep: deterministic replay for a fixed seed") {
  Rng seed_rng(13);
  const int n = 5, q = 2;
  std::vector<VoteCounts> counts(static_cast<std::size_t>(n) * q);
  for (VoteCounts& c : counts) c = {seed_rng.uniform_int(0, 20), seed_rng.uniform_int(1, 20)};
  const VoteTable data = make_table(n, q, counts);
  const Hyperparams hyper;
  const SweepConfig config;

  auto run = [&](std::uint64_t seed) {
    Rng r1(seed);
    ModelState s = two_bloc_state(n, q, r1, hyper);
    AugmentedCounts r;
    for (std::size_t t = 0; t < 40; ++t) sweep(data, s, r, hyper, config, t, r1);
    return s;
  };
  const ModelState a = run(2222), b = run(2222);
  CHECK(a.eta == b.eta);
  CHECK(a.z == b.z);
  REQUIRE(a.alpha.size() == b.alpha.size());
  for (std::size_t j = 0; j < a.alpha.size(); ++j) {
    CHECK(a.alpha[j].a0 == b.alpha[j].a0);
    CHECK(a.alpha[j].a1 == b.alpha[j].a1);
  }
}
