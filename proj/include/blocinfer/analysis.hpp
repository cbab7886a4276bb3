#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "blocinfer/bdmcmc.hpp"
#include "blocinfer/types.hpp"

namespace blocinfer {

struct CooccupancyMatrix {
  int n = 0;
  std::vector<double> values;  // row-major, symmetric, unit diagonal

  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * n + j]; }
};

struct RepresentativeClustering {
  int k_star = 0;
  std::vector<int> labels;      // length N, entries in [0, k_star)
  std::vector<int> medoids;     // k_star municipality indices
  std::vector<int> bloc_order;  // permutation of [0, k_star)
  double cost = 0.0;            // sum of distances to assigned medoids
};

struct QuestionFitTable {
  int n = 0, q = 0;
  std::vector<double> fit;             // N x Q, p_tilde - p_hat
  std::vector<double> question_median; // across municipalities
  std::vector<double> question_sd;
  std::vector<int> flagged;            // question indices, ascending
};

struct PolarizationRecord {
  int year = 0;
  int bloc_a = 0, bloc_b = 0;  // clustering label indices
  double mean_diff = 0.0;
  double sd_diff = 0.0;  // population SD across the year's questions
  int n_questions = 0;
};

// Wait-weighted pairwise same-bloc frequency across samples.
CooccupancyMatrix cooccupancy(const std::vector<PosteriorSample>& samples);

// PAM-style k-medoids on a symmetric zero-diagonal distance matrix, with
// k-means++-style seeding and best-of-n_restarts selection. Deterministic
// for a given seed.
RepresentativeClustering k_medoids(const Matrix& distance, int k_star, std::uint64_t seed,
                                   int n_restarts = 20);

Matrix distance_from_cooccupancy(const CooccupancyMatrix& cooc);

// Row-normalized median co-occupancy of each municipality against every bloc.
Matrix bloc_proportions(const CooccupancyMatrix& cooc, const RepresentativeClustering& clustering);

// South-to-north bloc permutation: blocs sorted by the minimum latitude of
// the municipalities whose majority proportion falls in them. Falls back to
// the identity order when any latitude is missing (warned = true).
std::vector<int> bloc_ordering(const RepresentativeClustering& clustering,
                               const std::vector<Municipality>& municipalities,
                               const Matrix& proportions, bool* warned = nullptr);

// Posterior-predictive median support minus observed support per cell, with
// per-question spread and the local-question flags.
QuestionFitTable question_fit(const VoteTable& data, const std::vector<PosteriorSample>& samples,
                              int draws_per_sample, Rng& rng);

// Pairwise Jensen-Shannon distance between observed supports on question q.
// log_base 0 selects the natural log.
Matrix js_matrix(const VoteTable& data, int q, double log_base = 0.0);

// Per-year mean and SD of the difference in bloc support across bloc pairs.
// vote_weighted aggregates raw votes; otherwise municipal proportions are
// averaged unweighted.
std::vector<PolarizationRecord> polarization_series(
    const VoteTable& data, const RepresentativeClustering& clustering,
    const std::vector<std::pair<int, int>>& bloc_pairs, bool vote_weighted = true);

// Summed per-question centered-log-ratio distances between municipalities,
// for external embedding.
Matrix clr_distance_export(const VoteTable& data, double pseudocount = 0.5);

// Wait-weighted posterior mean support alpha0/(alpha0+alpha1) per
// (representative bloc, question), averaged over bloc members.
Matrix bloc_support(const VoteTable& data, const std::vector<PosteriorSample>& samples,
                    const RepresentativeClustering& clustering);

// Relabels blocs into bloc_order positions (and permutes the proportion
// columns to match), leaving bloc_order as the identity.
void reorder_blocs(RepresentativeClustering& clustering, Matrix& proportions);

double median_of(std::vector<double> xs);

}  // namespace blocinfer
