#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "blocinfer/analysis.hpp"
#include "blocinfer/bdmcmc.hpp"
#include "blocinfer/simulation.hpp"
#include "blocinfer/types.hpp"

namespace blocinfer {

// Malformed input with the offending row numbers in the message.
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IngestOptions {
  // logical column name -> actual header name, for files with nonstandard
  // layouts
  std::map<std::string, std::string> column_map;
};

// Reads the standard vote-table CSV (municipality_id, municipality_name,
// question_id, year, yes, no, optional lat/lon/ballot_label/content_tag).
// Zero-total rows are dropped with a warning; municipalities left without a
// complete question set are dropped with a listing.
VoteTable ingest(const std::filesystem::path& path, const IngestOptions& options = {},
                 std::ostream* warnings = nullptr);

void write_vote_table(const VoteTable& data, const std::filesystem::path& path);

// Newline-delimited sample records: iteration, wait_time, K, eta, 1-based z,
// alpha flattened row-major in (k, q, s) order. Reals keep full precision.
void write_samples(const std::filesystem::path& path, const std::vector<PosteriorSample>& samples,
                   int n, int q);
std::vector<PosteriorSample> load_samples(const std::filesystem::path& path, int* n_out = nullptr,
                                          int* q_out = nullptr);

// 64-bit FNV-1a over the file bytes.
std::uint64_t fingerprint_file(const std::filesystem::path& path);

struct RunManifest {
  std::map<std::string, std::string> entries;

  void set(const std::string& key, const std::string& value) { entries[key] = value; }
  void set_int(const std::string& key, std::int64_t value);
  void set_real(const std::string& key, double value);
  const std::string& get(const std::string& key) const;

  void write(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

std::string format_real(double x);  // shortest round-trip decimal

// CSV writers for the analysis products. Municipality rows/columns follow
// emit_order (representative clustering order).
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& row_ids,
                      const std::vector<std::string>& col_ids,
                      const std::vector<int>& row_order, const std::vector<int>& col_order);
void write_cooccupancy_csv(const std::filesystem::path& path, const CooccupancyMatrix& cooc,
                           const VoteTable& data, const std::vector<int>& order);
void write_clustering_csv(const std::filesystem::path& path, const VoteTable& data,
                          const RepresentativeClustering& clustering, const Matrix& proportions);
void write_posterior_k_csv(const std::filesystem::path& path,
                           const std::map<int, double>& posterior);
void write_question_fit_csv(const std::filesystem::path& path, const VoteTable& data,
                            const QuestionFitTable& table);
void write_polarization_csv(const std::filesystem::path& path,
                            const std::vector<PolarizationRecord>& records);
void write_bloc_support_csv(const std::filesystem::path& path, const VoteTable& data,
                            const Matrix& support);
void write_ground_truth(const std::filesystem::path& dir, const VoteTable& data,
                        const GroundTruth& truth);
void write_recovery_report_csv(const std::filesystem::path& path,
                               const std::vector<RecoveryResult>& results);

// Municipality emission order: by bloc position in bloc_order, then by
// original index.
std::vector<int> emit_order(const RepresentativeClustering& clustering);

// Worker cap from BLOC_INFER_THREADS, falling back to hardware concurrency.
int thread_cap();

}  // namespace blocinfer
