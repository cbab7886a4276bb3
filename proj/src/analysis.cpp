#include "blocinfer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace blocinfer {

double median_of(std::vector<double> xs) {
  if (xs.empty()) throw std::domain_error("median_of: empty input");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
  double hi = xs[mid];
  if (xs.size() % 2 == 1) return hi;
  std::nth_element(xs.begin(), xs.begin() + mid - 1, xs.begin() + mid);
  return 0.5 * (xs[mid - 1] + hi);
}

CooccupancyMatrix cooccupancy(const std::vector<PosteriorSample>& samples) {
  if (samples.empty()) throw std::domain_error("cooccupancy: no samples");
  const int n = static_cast<int>(samples.front().state.z.size());
  CooccupancyMatrix out;
  out.n = n;
  out.values.assign(static_cast<std::size_t>(n) * n, 0.0);
  double total = 0.0;
  std::vector<std::vector<int>> members;
  for (const PosteriorSample& s : samples) {
    if (static_cast<int>(s.state.z.size()) != n) {
      throw std::domain_error("cooccupancy: inconsistent N across samples");
    }
    members.assign(s.state.K, {});
    for (int i = 0; i < n; ++i) members[s.state.z[i]].push_back(i);
    for (const std::vector<int>& bloc : members) {
      for (std::size_t a = 0; a < bloc.size(); ++a) {
        for (std::size_t b = a; b < bloc.size(); ++b) {
          out.at(bloc[a], bloc[b]) += s.wait_time;
        }
      }
    }
    total += s.wait_time;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double v = out.at(i, j) / total;
      out.at(i, j) = v;
      out.at(j, i) = v;
    }
  }
  return out;
}

Matrix distance_from_cooccupancy(const CooccupancyMatrix& cooc) {
  Matrix d(cooc.n, cooc.n);
  for (int i = 0; i < cooc.n; ++i) {
    for (int j = 0; j < cooc.n; ++j) {
      d.at(i, j) = i == j ? 0.0 : 1.0 - cooc.at(i, j);
    }
  }
  return d;
}

namespace {

struct PamResult {
  std::vector<int> medoids;
  std::vector<int> labels;
  double cost = 0.0;
};

std::vector<int> assign_labels(const Matrix& d, const std::vector<int>& medoids) {
  const int n = d.rows;
  std::vector<int> labels(n, 0);
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_m = 0;
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      const double dist = d.at(i, medoids[m]);
      if (dist < best) {
        best = dist;
        best_m = static_cast<int>(m);
      }
    }
    labels[i] = best_m;
  }
  // a medoid always belongs to its own cluster
  for (std::size_t m = 0; m < medoids.size(); ++m) labels[medoids[m]] = static_cast<int>(m);
  return labels;
}

double clustering_cost(const Matrix& d, const std::vector<int>& medoids,
                       const std::vector<int>& labels) {
  double cost = 0.0;
  for (int i = 0; i < d.rows; ++i) cost += d.at(i, medoids[labels[i]]);
  return cost;
}

PamResult pam_once(const Matrix& d, int k_star, Rng& rng) {
  const int n = d.rows;
  // k-means++-style seeding on distances
  std::vector<int> medoids;
  medoids.push_back(rng.uniform_int(0, n - 1));
  std::vector<double> min_d(n);
  while (static_cast<int>(medoids.size()) < k_star) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int m : medoids) best = std::min(best, d.at(i, m));
      min_d[i] = best * best;
      total += min_d[i];
    }
    int pick;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      pick = 0;
      double acc = min_d[0];
      while (pick + 1 < n && u >= acc) acc += min_d[++pick];
    } else {
      // all candidates coincide with a medoid; take any unused index
      pick = rng.uniform_int(0, n - 1);
    }
    if (std::find(medoids.begin(), medoids.end(), pick) == medoids.end()) {
      medoids.push_back(pick);
    } else {
      for (int i = 0; i < n; ++i) {
        if (std::find(medoids.begin(), medoids.end(), i) == medoids.end()) {
          medoids.push_back(i);
          break;
        }
      }
    }
  }

  std::vector<int> labels = assign_labels(d, medoids);
  for (int round = 0; round < 200; ++round) {
    bool changed = false;
    for (int m = 0; m < k_star; ++m) {
      // member minimizing the within-cluster distance sum; ties to lower index
      double best = std::numeric_limits<double>::infinity();
      int best_i = medoids[m];
      for (int i = 0; i < n; ++i) {
        if (labels[i] != m) continue;
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
          if (labels[j] == m) s += d.at(i, j);
        }
        if (s < best) {
          best = s;
          best_i = i;
        }
      }
      if (best_i != medoids[m]) {
        medoids[m] = best_i;
        changed = true;
      }
    }
    std::vector<int> next = assign_labels(d, medoids);
    if (!changed && next == labels) break;
    labels = std::move(next);
  }

  PamResult out;
  out.medoids = std::move(medoids);
  out.labels = std::move(labels);
  out.cost = clustering_cost(d, out.medoids, out.labels);
  return out;
}

}  // namespace

RepresentativeClustering k_medoids(const Matrix& distance, int k_star, std::uint64_t seed,
                                   int n_restarts) {
  const int n = distance.rows;
  if (distance.cols != n) throw std::domain_error("k_medoids: distance matrix must be square");
  if (k_star < 1 || k_star > n) throw std::domain_error("k_medoids: K_star must be in [1, N]");

  PamResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < std::max(1, n_restarts); ++restart) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(restart));
    PamResult r = pam_once(distance, k_star, rng);
    if (r.cost < best.cost) best = std::move(r);
  }

  // canonical labels: medoids in ascending municipality order
  std::vector<int> order(k_star);
  for (int m = 0; m < k_star; ++m) order[m] = m;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return best.medoids[a] < best.medoids[b]; });
  std::vector<int> rank(k_star);
  for (int pos = 0; pos < k_star; ++pos) rank[order[pos]] = pos;

  RepresentativeClustering out;
  out.k_star = k_star;
  out.medoids.resize(k_star);
  for (int m = 0; m < k_star; ++m) out.medoids[rank[m]] = best.medoids[m];
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) out.labels[i] = rank[best.labels[i]];
  out.bloc_order.resize(k_star);
  for (int m = 0; m < k_star; ++m) out.bloc_order[m] = m;
  out.cost = best.cost;
  return out;
}

Matrix bloc_proportions(const CooccupancyMatrix& cooc,
                        const RepresentativeClustering& clustering) {
  const int n = cooc.n;
  const int k_star = clustering.k_star;
  std::vector<std::vector<int>> members(k_star);
  for (int i = 0; i < n; ++i) members[clustering.labels[i]].push_back(i);
  for (int k = 0; k < k_star; ++k) {
    if (members[k].empty()) throw std::domain_error("bloc_proportions: empty cluster");
  }
  Matrix out(n, k_star);
  std::vector<double> vals;
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int k = 0; k < k_star; ++k) {
      vals.clear();
      for (int j : members[k]) vals.push_back(cooc.at(i, j));
      out.at(i, k) = median_of(vals);
      row_sum += out.at(i, k);
    }
    if (row_sum > 0.0) {
      for (int k = 0; k < k_star; ++k) out.at(i, k) /= row_sum;
    } else {
      out.at(i, clustering.labels[i]) = 1.0;  // isolated municipality
    }
  }
  return out;
}

std::vector<int> bloc_ordering(const RepresentativeClustering& clustering,
                               const std::vector<Municipality>& municipalities,
                               const Matrix& proportions, bool* warned) {
  const int k_star = clustering.k_star;
  std::vector<int> order(k_star);
  for (int k = 0; k < k_star; ++k) order[k] = k;
  if (warned) *warned = false;

  for (const Municipality& m : municipalities) {
    if (!m.latitude.has_value()) {
      if (warned) *warned = true;
      return order;  // identity when coordinates are incomplete
    }
  }

  std::vector<double> min_lat(k_star, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < municipalities.size(); ++i) {
    int majority = 0;
    for (int k = 1; k < k_star; ++k) {
      if (proportions.at(static_cast<int>(i), k) >
          proportions.at(static_cast<int>(i), majority)) {
        majority = k;
      }
    }
    min_lat[majority] = std::min(min_lat[majority], *municipalities[i].latitude);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return min_lat[a] < min_lat[b]; });
  return order;
}

QuestionFitTable question_fit(const VoteTable& data, const std::vector<PosteriorSample>& samples,
                              int draws_per_sample, Rng& rng) {
  if (samples.empty()) throw std::domain_error("question_fit: no samples");
  if (draws_per_sample < 1) throw std::domain_error("question_fit: draws_per_sample must be >= 1");
  const int n = data.n_municipalities();
  const int q_count = data.n_questions();
  QuestionFitTable out;
  out.n = n;
  out.q = q_count;
  out.fit.resize(static_cast<std::size_t>(n) * q_count);

  std::vector<double> pooled;
  pooled.reserve(samples.size() * static_cast<std::size_t>(draws_per_sample));
  for (int i = 0; i < n; ++i) {
    for (int q = 0; q < q_count; ++q) {
      pooled.clear();
      for (const PosteriorSample& s : samples) {
        const AlphaPair& a = s.state.alpha_at(s.state.z[i], q);
        for (int d = 0; d < draws_per_sample; ++d) {
          pooled.push_back(rng.beta(a.a0, a.a1));
        }
      }
      const double p_tilde = median_of(pooled);
      const VoteCounts& c = data.cell(i, q);
      const double p_hat =
          static_cast<double>(c.yes) / static_cast<double>(std::max<std::int64_t>(c.total(), 1));
      out.fit[static_cast<std::size_t>(i) * q_count + q] = p_tilde - p_hat;
    }
  }

  out.question_median.resize(q_count);
  out.question_sd.resize(q_count);
  std::vector<double> col(n);
  for (int q = 0; q < q_count; ++q) {
    for (int i = 0; i < n; ++i) col[i] = out.fit[static_cast<std::size_t>(i) * q_count + q];
    out.question_median[q] = median_of(col);
    double mean = 0.0;
    for (double x : col) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : col) ss += (x - mean) * (x - mean);
    out.question_sd[q] = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  }

  // flag questions with SD beyond median + 3 * MAD
  const double med_sd = median_of(out.question_sd);
  std::vector<double> devs(q_count);
  for (int q = 0; q < q_count; ++q) devs[q] = std::abs(out.question_sd[q] - med_sd);
  const double mad = median_of(devs);
  const double threshold = med_sd + 3.0 * mad;
  for (int q = 0; q < q_count; ++q) {
    if (out.question_sd[q] > threshold) out.flagged.push_back(q);
  }
  return out;
}

namespace {

double kl_bernoulli(double a, double m) {
  double acc = 0.0;
  if (a > 0.0) acc += a * std::log(a / m);
  if (a < 1.0) acc += (1.0 - a) * std::log((1.0 - a) / (1.0 - m));
  return acc;
}

}  // namespace

Matrix js_matrix(const VoteTable& data, int q, double log_base) {
  if (q < 0 || q >= data.n_questions()) throw std::domain_error("js_matrix: bad question index");
  const int n = data.n_municipalities();
  const double scale = log_base > 0.0 ? std::log(log_base) : 1.0;
  std::vector<double> p_hat(n);
  for (int i = 0; i < n; ++i) {
    const VoteCounts& c = data.cell(i, q);
    p_hat[i] = static_cast<double>(c.yes) / static_cast<double>(std::max<std::int64_t>(c.total(), 1));
  }
  Matrix out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double m = 0.5 * (p_hat[i] + p_hat[j]);
      double jsd = 0.0;
      if (p_hat[i] != p_hat[j]) {
        jsd = 0.5 * kl_bernoulli(p_hat[i], m) + 0.5 * kl_bernoulli(p_hat[j], m);
      }
      const double dist = std::sqrt(std::max(jsd / scale, 0.0));
      out.at(i, j) = dist;
      out.at(j, i) = dist;
    }
  }
  return out;
}

std::vector<PolarizationRecord> polarization_series(
    const VoteTable& data, const RepresentativeClustering& clustering,
    const std::vector<std::pair<int, int>>& bloc_pairs, bool vote_weighted) {
  const int n = data.n_municipalities();
  const int q_count = data.n_questions();
  for (const auto& [a, b] : bloc_pairs) {
    if (a < 0 || a >= clustering.k_star || b < 0 || b >= clustering.k_star) {
      throw std::domain_error("polarization_series: bloc pair out of range");
    }
  }

  // support per (bloc, question)
  Matrix support(clustering.k_star, q_count);
  for (int k = 0; k < clustering.k_star; ++k) {
    for (int q = 0; q < q_count; ++q) {
      double yes = 0.0, tot = 0.0, prop = 0.0;
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (clustering.labels[i] != k) continue;
        const VoteCounts& c = data.cell(i, q);
        yes += static_cast<double>(c.yes);
        tot += static_cast<double>(c.total());
        if (c.total() > 0) {
          prop += static_cast<double>(c.yes) / static_cast<double>(c.total());
          ++count;
        }
      }
      if (vote_weighted) {
        support.at(k, q) = tot > 0.0 ? yes / tot : 0.0;
      } else {
        support.at(k, q) = count > 0 ? prop / count : 0.0;
      }
    }
  }

  std::map<int, std::vector<int>> by_year;
  for (int q = 0; q < q_count; ++q) by_year[data.questions[q].year].push_back(q);

  std::vector<PolarizationRecord> out;
  for (const auto& [year, qs] : by_year) {
    for (const auto& [a, b] : bloc_pairs) {
      PolarizationRecord rec;
      rec.year = year;
      rec.bloc_a = a;
      rec.bloc_b = b;
      rec.n_questions = static_cast<int>(qs.size());
      double mean = 0.0;
      for (int q : qs) mean += support.at(a, q) - support.at(b, q);
      mean /= qs.size();
      double ss = 0.0;
      for (int q : qs) {
        const double diff = support.at(a, q) - support.at(b, q);
        ss += (diff - mean) * (diff - mean);
      }
      rec.mean_diff = mean;
      rec.sd_diff = std::sqrt(ss / qs.size());
      out.push_back(rec);
    }
  }
  return out;
}

Matrix clr_distance_export(const VoteTable& data, double pseudocount) {
  if (!(pseudocount > 0.0)) throw std::domain_error("clr_distance_export: pseudocount must be > 0");
  const int n = data.n_municipalities();
  const int q_count = data.n_questions();
  // clr coordinates per (i, q): (u, -u) with u = (log v0 - log v1) / 2
  Matrix u(n, q_count);
  for (int i = 0; i < n; ++i) {
    for (int q = 0; q < q_count; ++q) {
      const VoteCounts& c = data.cell(i, q);
      const double tot = static_cast<double>(c.total()) + 2.0 * pseudocount;
      const double v0 = (static_cast<double>(c.yes) + pseudocount) / tot;
      const double v1 = (static_cast<double>(c.no) + pseudocount) / tot;
      u.at(i, q) = 0.5 * (std::log(v0) - std::log(v1));
    }
  }
  Matrix out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (int q = 0; q < q_count; ++q) {
        const double diff = u.at(i, q) - u.at(j, q);
        acc += 2.0 * diff * diff;  // both clr components differ by |diff|
      }
      const double dist = std::sqrt(acc);
      out.at(i, j) = dist;
      out.at(j, i) = dist;
    }
  }
  return out;
}

void reorder_blocs(RepresentativeClustering& clustering, Matrix& proportions) {
  const int k_star = clustering.k_star;
  std::vector<int> pos(k_star);
  for (int p = 0; p < k_star; ++p) pos[clustering.bloc_order[p]] = p;
  for (int& label : clustering.labels) label = pos[label];
  std::vector<int> medoids(k_star);
  for (int k = 0; k < k_star; ++k) medoids[pos[k]] = clustering.medoids[k];
  clustering.medoids = std::move(medoids);
  Matrix next(proportions.rows, k_star);
  for (int i = 0; i < proportions.rows; ++i) {
    for (int k = 0; k < k_star; ++k) next.at(i, pos[k]) = proportions.at(i, k);
  }
  proportions = std::move(next);
  for (int p = 0; p < k_star; ++p) clustering.bloc_order[p] = p;
}

Matrix bloc_support(const VoteTable& data, const std::vector<PosteriorSample>& samples,
                    const RepresentativeClustering& clustering) {
  if (samples.empty()) throw std::domain_error("bloc_support: no samples");
  const int n = data.n_municipalities();
  const int q_count = data.n_questions();
  // wait-weighted posterior mean support per municipality, then averaged
  // within representative blocs (label switching safe)
  Matrix muni_support(n, q_count);
  double total = 0.0;
  for (const PosteriorSample& s : samples) total += s.wait_time;
  for (const PosteriorSample& s : samples) {
    const double w = s.wait_time / total;
    for (int i = 0; i < n; ++i) {
      const int k = s.state.z[i];
      for (int q = 0; q < q_count; ++q) {
        muni_support.at(i, q) += w * s.state.alpha_at(k, q).mean_support();
      }
    }
  }
  Matrix out(clustering.k_star, q_count);
  std::vector<int> sizes(clustering.k_star, 0);
  for (int i = 0; i < n; ++i) sizes[clustering.labels[i]]++;
  for (int i = 0; i < n; ++i) {
    const int k = clustering.labels[i];
    for (int q = 0; q < q_count; ++q) {
      out.at(k, q) += muni_support.at(i, q) / sizes[k];
    }
  }
  return out;
}

}  // namespace blocinfer
