#include "blocinfer/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace blocinfer {

namespace {

// Minimal CSV splitting with double-quote support.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t pos = 0; pos < line.size(); ++pos) {
    const char ch = line[pos];
    if (quoted) {
      if (ch == '"') {
        if (pos + 1 < line.size() && line[pos + 1] == '"') {
          cur.push_back('"');
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += "\"";
  return out;
}

bool parse_int64(const std::string& s, std::int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && !s.empty();
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

VoteTable ingest(const std::filesystem::path& path, const IngestOptions& options,
                 std::ostream* warnings) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty file: " + path.string());
  const std::vector<std::string> header = split_csv_line(line);

  auto resolve = [&](const std::string& logical) {
    const auto it = options.column_map.find(logical);
    return it == options.column_map.end() ? logical : it->second;
  };
  auto column_of = [&](const std::string& logical, bool required) {
    const std::string actual = resolve(logical);
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == actual) return static_cast<int>(c);
    }
    if (required) throw IngestError("missing required column '" + actual + "' in " + path.string());
    return -1;
  };

  const int col_mid = column_of("municipality_id", true);
  const int col_mname = column_of("municipality_name", true);
  const int col_qid = column_of("question_id", true);
  const int col_year = column_of("year", true);
  const int col_yes = column_of("yes", true);
  const int col_no = column_of("no", true);
  const int col_lat = column_of("lat", false);
  const int col_lon = column_of("lon", false);
  const int col_label = column_of("ballot_label", false);
  const int col_tag = column_of("content_tag", false);

  struct Row {
    int line_no;
    std::string mid, mname, qid;
    int year;
    std::int64_t yes, no;
    std::optional<double> lat, lon;
    std::string label, tag;
  };
  std::vector<Row> rows;
  std::map<std::pair<std::string, std::string>, int> seen;  // key -> line number

  int line_no = 1;
  std::vector<int> dropped_lines;
  std::vector<std::string> dropped_keys;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (static_cast<int>(f.size()) < static_cast<int>(header.size())) {
      throw IngestError("row " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(f.size()));
    }
    Row r;
    r.line_no = line_no;
    r.mid = f[col_mid];
    r.mname = f[col_mname];
    r.qid = f[col_qid];
    std::int64_t year = 0;
    if (!parse_int64(f[col_year], year)) {
      throw IngestError("row " + std::to_string(line_no) + ": bad year '" + f[col_year] + "'");
    }
    r.year = static_cast<int>(year);
    if (!parse_int64(f[col_yes], r.yes) || !parse_int64(f[col_no], r.no)) {
      throw IngestError("row " + std::to_string(line_no) + ": bad vote counts");
    }
    if (r.yes < 0 || r.no < 0) {
      throw IngestError("row " + std::to_string(line_no) + ": negative vote counts");
    }
    if (col_lat >= 0 && !f[col_lat].empty()) {
      double v;
      if (!parse_double(f[col_lat], v)) {
        throw IngestError("row " + std::to_string(line_no) + ": bad lat");
      }
      r.lat = v;
    }
    if (col_lon >= 0 && !f[col_lon].empty()) {
      double v;
      if (!parse_double(f[col_lon], v)) {
        throw IngestError("row " + std::to_string(line_no) + ": bad lon");
      }
      r.lon = v;
    }
    if (col_label >= 0) r.label = f[col_label];
    if (col_tag >= 0) r.tag = f[col_tag];

    const auto key = std::make_pair(r.mid, r.qid);
    const auto [it, inserted] = seen.emplace(key, line_no);
    if (!inserted) {
      throw IngestError("duplicate (municipality, question) key (" + r.mid + ", " + r.qid +
                        ") at rows " + std::to_string(it->second) + " and " +
                        std::to_string(line_no));
    }
    if (r.yes + r.no == 0) {
      dropped_lines.push_back(line_no);
      dropped_keys.push_back("(" + r.mid + ", " + r.qid + ")");
      continue;
    }
    rows.push_back(std::move(r));
  }

  if (warnings && !dropped_lines.empty()) {
    *warnings << "warning: dropped " << dropped_lines.size() << " zero-total rows:";
    for (const std::string& k : dropped_keys) *warnings << ' ' << k;
    *warnings << '\n';
  }

  // first-appearance order for municipalities and questions
  std::vector<Municipality> munis;
  std::vector<QuestionInfo> questions;
  std::map<std::string, int> muni_index, q_index;
  for (const Row& r : rows) {
    if (muni_index.emplace(r.mid, static_cast<int>(munis.size())).second) {
      Municipality m;
      m.id = r.mid;
      m.name = r.mname;
      m.latitude = r.lat;
      m.longitude = r.lon;
      munis.push_back(std::move(m));
    } else {
      const Municipality& m = munis[muni_index[r.mid]];
      if (m.name != r.mname) {
        throw IngestError("row " + std::to_string(r.line_no) + ": municipality " + r.mid +
                          " has inconsistent name");
      }
    }
    if (q_index.emplace(r.qid, static_cast<int>(questions.size())).second) {
      QuestionInfo q;
      q.id = r.qid;
      q.year = r.year;
      q.ballot_label = r.label;
      q.content_tag = r.tag;
      questions.push_back(std::move(q));
    } else if (questions[q_index[r.qid]].year != r.year) {
      throw IngestError("row " + std::to_string(r.line_no) + ": question " + r.qid +
                        " has inconsistent year");
    }
  }
  if (munis.empty() || questions.empty()) {
    throw IngestError("no usable rows in " + path.string());
  }

  // reject municipalities that do not cover every question
  std::vector<int> cover(munis.size(), 0);
  for (const Row& r : rows) cover[muni_index[r.mid]]++;
  std::vector<bool> keep(munis.size(), true);
  std::vector<std::string> rejected;
  for (std::size_t i = 0; i < munis.size(); ++i) {
    if (cover[i] != static_cast<int>(questions.size())) {
      keep[i] = false;
      rejected.push_back(munis[i].id);
    }
  }
  if (!rejected.empty() && warnings) {
    *warnings << "warning: rejected " << rejected.size()
              << " municipalities missing questions:";
    for (const std::string& id : rejected) *warnings << ' ' << id;
    *warnings << '\n';
  }

  VoteTable data;
  std::map<std::string, int> kept_index;
  for (std::size_t i = 0; i < munis.size(); ++i) {
    if (keep[i]) {
      kept_index[munis[i].id] = static_cast<int>(data.municipalities.size());
      data.municipalities.push_back(munis[i]);
    }
  }
  data.questions = questions;
  if (data.municipalities.empty()) {
    throw IngestError("no municipality covers the full question set in " + path.string());
  }
  data.counts.assign(data.municipalities.size() * questions.size(), VoteCounts{});
  for (const Row& r : rows) {
    const auto it = kept_index.find(r.mid);
    if (it == kept_index.end()) continue;
    data.cell(it->second, q_index[r.qid]) = VoteCounts{r.yes, r.no};
  }
  return data;
}

void write_vote_table(const VoteTable& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  bool any_coord = false;
  for (const Municipality& m : data.municipalities) {
    if (m.latitude || m.longitude) any_coord = true;
  }
  out << "municipality_id,municipality_name,question_id,year,yes,no";
  if (any_coord) out << ",lat,lon";
  out << ",ballot_label,content_tag\n";
  for (int i = 0; i < data.n_municipalities(); ++i) {
    const Municipality& m = data.municipalities[i];
    for (int q = 0; q < data.n_questions(); ++q) {
      const QuestionInfo& info = data.questions[q];
      const VoteCounts& c = data.cell(i, q);
      out << csv_escape(m.id) << ',' << csv_escape(m.name) << ',' << csv_escape(info.id) << ','
          << info.year << ',' << c.yes << ',' << c.no;
      if (any_coord) {
        out << ',' << (m.latitude ? format_real(*m.latitude) : "") << ','
            << (m.longitude ? format_real(*m.longitude) : "");
      }
      out << ',' << csv_escape(info.ballot_label) << ',' << csv_escape(info.content_tag) << '\n';
    }
  }
}

void write_samples(const std::filesystem::path& path, const std::vector<PosteriorSample>& samples,
                   int n, int q) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "#blocinfer-samples v1 n=" << n << " q=" << q << "\n";
  for (const PosteriorSample& s : samples) {
    out << s.iteration << ' ' << format_real(s.wait_time) << ' ' << s.state.K;
    for (double e : s.state.eta) out << ' ' << format_real(e);
    for (int zi : s.state.z) out << ' ' << zi + 1;
    for (const AlphaPair& a : s.state.alpha) {
      out << ' ' << format_real(a.a0) << ' ' << format_real(a.a1);
    }
    out << '\n';
  }
}

std::vector<PosteriorSample> load_samples(const std::filesystem::path& path, int* n_out,
                                          int* q_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty sample file: " + path.string());
  int n = -1, q = -1;
  if (std::sscanf(line.c_str(), "#blocinfer-samples v1 n=%d q=%d", &n, &q) != 2 || n < 0 ||
      q < 0) {
    throw std::runtime_error("bad sample file header in " + path.string());
  }
  if (n_out) *n_out = n;
  if (q_out) *q_out = q;

  std::vector<PosteriorSample> samples;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream iss(line);
    PosteriorSample s;
    if (!(iss >> s.iteration >> s.wait_time >> s.state.K) || s.state.K < 1) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": bad sample record");
    }
    s.state.eta.resize(s.state.K);
    for (double& e : s.state.eta) iss >> e;
    s.state.z.resize(n);
    for (int& zi : s.state.z) {
      iss >> zi;
      --zi;
    }
    s.state.alpha.resize(static_cast<std::size_t>(s.state.K) * q);
    for (AlphaPair& a : s.state.alpha) iss >> a.a0 >> a.a1;
    if (!iss) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": truncated sample record");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::uint64_t fingerprint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t hash = 14695981039346656037ull;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize b = 0; b < got; ++b) {
      hash ^= static_cast<unsigned char>(buf[b]);
      hash *= 1099511628211ull;
    }
  }
  return hash;
}

void RunManifest::set_int(const std::string& key, std::int64_t value) {
  entries[key] = std::to_string(value);
}

void RunManifest::set_real(const std::string& key, double value) {
  entries[key] = format_real(value);
}

const std::string& RunManifest::get(const std::string& key) const {
  const auto it = entries.find(key);
  if (it == entries.end()) throw std::runtime_error("manifest: missing key '" + key + "'");
  return it->second;
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  RunManifest m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("bad manifest line: " + line);
    m.entries[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

std::vector<int> emit_order(const RepresentativeClustering& clustering) {
  std::vector<int> pos(clustering.k_star);
  for (int p = 0; p < clustering.k_star; ++p) pos[clustering.bloc_order[p]] = p;
  std::vector<int> order(clustering.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return pos[clustering.labels[a]] < pos[clustering.labels[b]];
  });
  return order;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& row_ids,
                      const std::vector<std::string>& col_ids,
                      const std::vector<int>& row_order, const std::vector<int>& col_order) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "id";
  for (int j : col_order) out << ',' << csv_escape(col_ids[j]);
  out << '\n';
  for (int i : row_order) {
    out << csv_escape(row_ids[i]);
    for (int j : col_order) out << ',' << format_real(m.at(i, j));
    out << '\n';
  }
}

namespace {

std::vector<std::string> municipality_ids(const VoteTable& data) {
  std::vector<std::string> ids;
  ids.reserve(data.municipalities.size());
  for (const Municipality& m : data.municipalities) ids.push_back(m.id);
  return ids;
}

}  // namespace

void write_cooccupancy_csv(const std::filesystem::path& path, const CooccupancyMatrix& cooc,
                           const VoteTable& data, const std::vector<int>& order) {
  Matrix m(cooc.n, cooc.n);
  m.v = cooc.values;
  write_matrix_csv(path, m, municipality_ids(data), municipality_ids(data), order, order);
}

void write_clustering_csv(const std::filesystem::path& path, const VoteTable& data,
                          const RepresentativeClustering& clustering, const Matrix& proportions) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::vector<int> pos(clustering.k_star);
  for (int p = 0; p < clustering.k_star; ++p) pos[clustering.bloc_order[p]] = p;
  out << "municipality_id,municipality_name,bloc,is_medoid";
  for (int p = 0; p < clustering.k_star; ++p) out << ",proportion_bloc" << p + 1;
  out << '\n';
  for (int i : emit_order(clustering)) {
    const bool medoid = std::find(clustering.medoids.begin(), clustering.medoids.end(), i) !=
                        clustering.medoids.end();
    out << csv_escape(data.municipalities[i].id) << ','
        << csv_escape(data.municipalities[i].name) << ',' << pos[clustering.labels[i]] + 1 << ','
        << (medoid ? 1 : 0);
    for (int p = 0; p < clustering.k_star; ++p) {
      out << ',' << format_real(proportions.at(i, clustering.bloc_order[p]));
    }
    out << '\n';
  }
}

void write_posterior_k_csv(const std::filesystem::path& path,
                           const std::map<int, double>& posterior) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "k,probability\n";
  for (const auto& [k, p] : posterior) out << k << ',' << format_real(p) << '\n';
}

void write_question_fit_csv(const std::filesystem::path& path, const VoteTable& data,
                            const QuestionFitTable& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "question_id,year,median_fit,sd_fit,flagged\n";
  for (int q = 0; q < table.q; ++q) {
    const bool flagged =
        std::find(table.flagged.begin(), table.flagged.end(), q) != table.flagged.end();
    out << csv_escape(data.questions[q].id) << ',' << data.questions[q].year << ','
        << format_real(table.question_median[q]) << ',' << format_real(table.question_sd[q])
        << ',' << (flagged ? 1 : 0) << '\n';
  }
}

void write_polarization_csv(const std::filesystem::path& path,
                            const std::vector<PolarizationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "year,bloc_a,bloc_b,mean_diff,sd_diff,n_questions\n";
  for (const PolarizationRecord& r : records) {
    out << r.year << ',' << r.bloc_a + 1 << ',' << r.bloc_b + 1 << ',' << format_real(r.mean_diff)
        << ',' << format_real(r.sd_diff) << ',' << r.n_questions << '\n';
  }
}

void write_bloc_support_csv(const std::filesystem::path& path, const VoteTable& data,
                            const Matrix& support) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "bloc";
  for (const QuestionInfo& q : data.questions) out << ',' << csv_escape(q.id);
  out << '\n';
  for (int k = 0; k < support.rows; ++k) {
    out << k + 1;
    for (int q = 0; q < support.cols; ++q) out << ',' << format_real(support.at(k, q));
    out << '\n';
  }
}

void write_ground_truth(const std::filesystem::path& dir, const VoteTable& data,
                        const GroundTruth& truth) {
  {
    std::ofstream out(dir / "truth_lambda.csv");
    if (!out) throw std::runtime_error("cannot write truth_lambda.csv");
    out << "municipality_id";
    for (int k = 0; k < truth.lambda.cols; ++k) out << ",lambda_bloc" << k + 1;
    out << '\n';
    for (int i = 0; i < truth.lambda.rows; ++i) {
      out << csv_escape(data.municipalities[i].id);
      for (int k = 0; k < truth.lambda.cols; ++k) out << ',' << format_real(truth.lambda.at(i, k));
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "truth_alpha.csv");
    if (!out) throw std::runtime_error("cannot write truth_alpha.csv");
    out << "bloc,question_id,alpha_yes,alpha_no\n";
    const int q_count = data.n_questions();
    const int K = truth.lambda.cols;
    for (int k = 0; k < K; ++k) {
      for (int q = 0; q < q_count; ++q) {
        const AlphaPair& a = truth.alpha[static_cast<std::size_t>(k) * q_count + q];
        out << k + 1 << ',' << csv_escape(data.questions[q].id) << ',' << format_real(a.a0) << ','
            << format_real(a.a1) << '\n';
      }
    }
  }
}

void write_recovery_report_csv(const std::filesystem::path& path,
                               const std::vector<RecoveryResult>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "cell,k_true,n,q,c,delta,replicate,mode,mass_at_true,matched\n";
  for (const RecoveryResult& r : results) {
    out << r.cell + 1 << ',' << r.spec.k_true << ',' << r.spec.n << ',' << r.spec.q << ','
        << r.spec.c << ',' << format_real(r.spec.delta) << ',' << r.replicate + 1 << ','
        << r.mode << ',' << format_real(r.mass_at_true) << ',' << (r.matched ? 1 : 0) << '\n';
  }
}

int thread_cap() {
  if (const char* env = std::getenv("BLOC_INFER_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace blocinfer
