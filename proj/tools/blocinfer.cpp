// blocinfer: voting-bloc inference from municipality-level referendum totals.
// Subcommands: infer, analyze, simulate, recover.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "blocinfer/analysis.hpp"
#include "blocinfer/bdmcmc.hpp"
#include "blocinfer/io.hpp"
#include "blocinfer/simulation.hpp"

namespace fs = std::filesystem;
using namespace blocinfer;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct HyperOpts {
  Hyperparams hyper;
  bool beta_birth_set = false;
};

void add_hyper_options(CLI::App* cmd, HyperOpts& opts) {
  cmd->add_option("--kappa", opts.hyper.kappa, "Gamma shape for alpha components");
  cmd->add_option("--theta", opts.hyper.theta, "Gamma scale for alpha components");
  cmd->add_option("--lambda", opts.hyper.lambda, "Poisson mean for the number of blocs");
  cmd->add_option("--gamma", opts.hyper.gamma, "Dirichlet concentration for eta");
  cmd->add_option("--beta-birth", opts.hyper.beta_birth, "BD birth rate (default: lambda)")
      ->each([&](const std::string&) { opts.beta_birth_set = true; });
  cmd->add_option("--k-max", opts.hyper.k_max, "Cap on the number of blocs");
}

Hyperparams resolve_hyper(const HyperOpts& opts) {
  Hyperparams h = opts.hyper;
  if (!opts.beta_birth_set) h.beta_birth = h.lambda;
  h.validate();
  return h;
}

IngestOptions parse_columns(const std::string& spec) {
  IngestOptions opts;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--columns", "expected logical=actual pairs");
    }
    opts.column_map[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return opts;
}

std::string hex64(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

void write_failure_marker(const fs::path& dir, const std::string& message) {
  std::error_code ec;
  if (!fs::exists(dir, ec)) return;
  std::ofstream out(dir / "FAILED");
  out << message << '\n';
}

struct AnalysisParams {
  int k_star = 0;  // 0 = posterior mode
  int draws = 100;
  double pseudocount = 0.5;
  int min_bloc_size = 5;
  std::uint64_t seed = 0;
};

// Emits every posterior-analysis product into out_dir. Shared by infer and
// analyze so the two paths produce identical files.
void emit_products(const fs::path& out_dir, const VoteTable& data,
                   const std::vector<PosteriorSample>& samples, const AnalysisParams& params) {
  write_posterior_k_csv(out_dir / "posterior_k.csv", posterior_K(samples, params.min_bloc_size));

  const CooccupancyMatrix cooc = cooccupancy(samples);
  const Matrix dist = distance_from_cooccupancy(cooc);
  int k_star = params.k_star > 0
                   ? params.k_star
                   : posterior_mode(posterior_K(samples, params.min_bloc_size));
  k_star = std::min(k_star, data.n_municipalities());

  RepresentativeClustering clustering =
      k_medoids(dist, k_star, Rng::splitmix64(params.seed ^ 0x6d656469ull));
  Matrix proportions = bloc_proportions(cooc, clustering);
  bool warned = false;
  clustering.bloc_order = bloc_ordering(clustering, data.municipalities, proportions, &warned);
  if (warned) {
    std::cerr << "warning: missing coordinates; blocs keep their clustering order\n";
  }
  reorder_blocs(clustering, proportions);

  const std::vector<int> order = emit_order(clustering);
  write_cooccupancy_csv(out_dir / "cooccupancy.csv", cooc, data, order);
  write_clustering_csv(out_dir / "clustering.csv", data, clustering, proportions);

  Rng fit_rng(Rng::splitmix64(params.seed ^ 0x71666974ull));
  const QuestionFitTable fit = question_fit(data, samples, params.draws, fit_rng);
  write_question_fit_csv(out_dir / "question_fit.csv", data, fit);

  std::vector<std::string> ids;
  for (const Municipality& m : data.municipalities) ids.push_back(m.id);
  for (int q = 0; q < data.n_questions(); ++q) {
    const Matrix js = js_matrix(data, q);
    write_matrix_csv(out_dir / ("js_question_" + data.questions[q].id + ".csv"), js, ids, ids,
                     order, order);
  }
  write_matrix_csv(out_dir / "clr_distance.csv", clr_distance_export(data, params.pseudocount),
                   ids, ids, order, order);

  std::vector<std::pair<int, int>> pairs;
  if (clustering.k_star == 2) {
    pairs = {{0, 1}};
  } else if (clustering.k_star >= 3) {
    const int mid = clustering.k_star / 2;
    pairs = {{0, mid}, {mid, clustering.k_star - 1}, {0, clustering.k_star - 1}};
  }
  write_polarization_csv(out_dir / "polarization.csv",
                         polarization_series(data, clustering, pairs));
  write_bloc_support_csv(out_dir / "bloc_support.csv", data,
                         bloc_support(data, samples, clustering));
}

int run_infer(const std::string& data_path, const std::string& out_dir_s,
              const std::string& columns, const HyperOpts& hyper_opts, RunConfig run_config,
              const SweepConfig& sweep_config, AnalysisParams params) {
  const fs::path out_dir(out_dir_s);
  fs::create_directories(out_dir);
  try {
    const Hyperparams hyper = resolve_hyper(hyper_opts);
    run_config.validate();
    const std::uint64_t fingerprint = fingerprint_file(data_path);
    const VoteTable data = ingest(data_path, parse_columns(columns), &std::cerr);

    RunManifest manifest;
    manifest.set("tool_version", kVersion);
    manifest.set("input_path", data_path);
    manifest.set("data_fingerprint", hex64(fingerprint));
    manifest.set_int("n_municipalities", data.n_municipalities());
    manifest.set_int("n_questions", data.n_questions());
    manifest.set_real("kappa", hyper.kappa);
    manifest.set_real("theta", hyper.theta);
    manifest.set_real("lambda", hyper.lambda);
    manifest.set_real("gamma", hyper.gamma);
    manifest.set_real("beta_birth", hyper.beta_birth);
    manifest.set_int("k_max", hyper.k_max);
    manifest.set_int("iterations", run_config.iterations);
    manifest.set_int("burn_in", run_config.burn_in);
    manifest.set_int("thin", run_config.thin);
    manifest.set_real("bd_time", run_config.bd_time);
    manifest.set_int("seed", static_cast<std::int64_t>(run_config.seed));
    manifest.set_int("chains", run_config.chains);
    manifest.set_real("alpha_total_proposal_shape", sweep_config.alpha_total_proposal.shape);
    manifest.set_real("alpha_total_proposal_scale", sweep_config.alpha_total_proposal.scale);
    manifest.set_real("alpha_component_proposal_shape",
                      sweep_config.alpha_component_proposal.shape);
    manifest.set_real("alpha_component_proposal_scale",
                      sweep_config.alpha_component_proposal.scale);
    manifest.set_int("min_bloc_size", params.min_bloc_size);
    manifest.set_int("predictive_draws", params.draws);
    manifest.set_real("clr_pseudocount", params.pseudocount);
    manifest.write(out_dir / "manifest.txt");

    std::vector<BdDiagnostics> diags;
    const std::vector<std::vector<PosteriorSample>> chains =
        run_chains(data, hyper, sweep_config, run_config, thread_cap(), &diags);

    std::vector<PosteriorSample> pooled;
    std::ofstream diag_out(out_dir / "diagnostics.txt");
    for (std::size_t c = 0; c < chains.size(); ++c) {
      write_samples(out_dir / ("samples_chain" + std::to_string(c + 1) + ".csv"), chains[c],
                    data.n_municipalities(), data.n_questions());
      diag_out << "chain " << c + 1 << ": samples=" << chains[c].size()
               << " bd_events=" << diags[c].events << " births=" << diags[c].births
               << " deaths=" << diags[c].deaths << " rejected_births=" << diags[c].rejected_births
               << " capped_waits=" << diags[c].capped_waits
               << " clamped_rates=" << diags[c].clamped_rates << " mode_k="
               << posterior_mode(posterior_K(chains[c], params.min_bloc_size)) << '\n';
      pooled.insert(pooled.end(), chains[c].begin(), chains[c].end());
    }

    params.seed = run_config.seed;
    emit_products(out_dir, data, pooled, params);
    return 0;
  } catch (const IngestError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    write_failure_marker(out_dir, e.what());
    return kExitData;
  } catch (const std::domain_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    write_failure_marker(out_dir, e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    write_failure_marker(out_dir, e.what());
    return kExitRuntime;
  }
}

int run_analyze(const std::string& samples_dir_s, const std::string& data_path,
                const std::string& out_dir_s, const std::string& columns, AnalysisParams params,
                bool k_star_given, bool min_bloc_given) {
  const fs::path samples_dir(samples_dir_s);
  const fs::path out_dir = out_dir_s.empty() ? samples_dir : fs::path(out_dir_s);
  try {
    const RunManifest manifest = RunManifest::load(samples_dir / "manifest.txt");
    const std::uint64_t fingerprint = fingerprint_file(data_path);
    if (hex64(fingerprint) != manifest.get("data_fingerprint")) {
      std::cerr << "error: data fingerprint mismatch: stored samples were produced from "
                << manifest.get("input_path") << " (fingerprint "
                << manifest.get("data_fingerprint") << "), but " << data_path
                << " has fingerprint " << hex64(fingerprint) << "; refusing to mix them\n";
      return kExitData;
    }
    const VoteTable data = ingest(data_path, parse_columns(columns), &std::cerr);

    std::vector<PosteriorSample> pooled;
    for (int c = 1;; ++c) {
      const fs::path p = samples_dir / ("samples_chain" + std::to_string(c) + ".csv");
      if (!fs::exists(p)) break;
      int n = 0, q = 0;
      std::vector<PosteriorSample> chain = load_samples(p, &n, &q);
      if (n != data.n_municipalities() || q != data.n_questions()) {
        throw std::domain_error("sample dimensions do not match the data table");
      }
      pooled.insert(pooled.end(), chain.begin(), chain.end());
    }
    if (pooled.empty()) throw std::domain_error("no sample files in " + samples_dir.string());

    params.seed = static_cast<std::uint64_t>(std::stoll(manifest.get("seed")));
    if (!min_bloc_given) params.min_bloc_size = std::stoi(manifest.get("min_bloc_size"));
    if (!k_star_given) params.k_star = 0;
    fs::create_directories(out_dir);
    emit_products(out_dir, data, pooled, params);
    return 0;
  } catch (const IngestError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::domain_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int run_simulate(const SimSpec& spec, const std::string& out_dir_s) {
  const fs::path out_dir(out_dir_s);
  try {
    spec.validate();
    fs::create_directories(out_dir);
    Rng rng(spec.seed);
    const auto [data, truth] = simulate_dataset(spec, rng);
    write_vote_table(data, out_dir / "dataset.csv");
    write_ground_truth(out_dir, data, truth);
    return 0;
  } catch (const std::domain_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    write_failure_marker(out_dir, e.what());
    return kExitRuntime;
  }
}

int run_recover(const std::string& grid_path, int replicates, const std::string& out_dir_s,
                const HyperOpts& hyper_opts, RunConfig run_config,
                const SweepConfig& sweep_config, int min_bloc_size) {
  const fs::path out_dir(out_dir_s);
  try {
    const Hyperparams hyper = resolve_hyper(hyper_opts);
    std::ifstream in(grid_path);
    if (!in) throw IngestError("cannot open " + grid_path);
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty grid file");
    std::vector<SimSpec> grid;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      SimSpec spec;
      double delta;
      long long c;
      if (std::sscanf(line.c_str(), "%d,%d,%d,%lld,%lf", &spec.k_true, &spec.n, &spec.q, &c,
                      &delta) != 5) {
        throw IngestError("grid row " + std::to_string(line_no) +
                          ": expected k_true,n,q,c,delta");
      }
      spec.c = c;
      spec.delta = delta;
      spec.validate();
      grid.push_back(spec);
    }
    if (grid.empty()) throw IngestError("grid file has no rows");

    fs::create_directories(out_dir);
    const std::vector<RecoveryResult> results = recovery_grid(
        grid, replicates, hyper, sweep_config, run_config, min_bloc_size, thread_cap());
    write_recovery_report_csv(out_dir / "recovery_report.csv", results);
    return 0;
  } catch (const IngestError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::domain_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    write_failure_marker(out_dir, e.what());
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent voting bloc inference from referendum vote totals"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // infer
  auto* infer = app.add_subcommand("infer", "Run BD-MCMC inference on a vote table");
  std::string data_path, out_dir, columns;
  HyperOpts hyper_opts;
  RunConfig run_config;
  SweepConfig sweep_config;
  AnalysisParams params;
  infer->add_option("--data", data_path, "Input vote-table CSV")->required();
  infer->add_option("--out", out_dir, "Output directory")->required();
  infer->add_option("--chains", run_config.chains, "Number of independent chains");
  infer->add_option("--iterations", run_config.iterations, "Total iterations per chain");
  infer->add_option("--burn-in", run_config.burn_in, "Burn-in iterations");
  infer->add_option("--thin", run_config.thin, "Thinning interval");
  infer->add_option("--seed", run_config.seed, "Root RNG seed");
  infer->add_option("--bd-time", run_config.bd_time, "BD process time per iteration");
  infer->add_option("--min-bloc-size", params.min_bloc_size,
                    "Bloc size threshold for the filtered posterior on K");
  infer->add_option("--draws", params.draws, "Predictive draws per retained sample");
  infer->add_option("--pseudocount", params.pseudocount, "CLR pseudocount");
  infer->add_option("--columns", columns, "Column remapping, logical=actual[,...]");
  add_hyper_options(infer, hyper_opts);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Recompute products from stored samples");
  std::string samples_dir, analyze_data, analyze_out, analyze_columns;
  AnalysisParams analyze_params;
  analyze->add_option("--samples", samples_dir, "Directory holding a prior run")->required();
  analyze->add_option("--data", analyze_data, "The vote-table CSV the run used")->required();
  analyze->add_option("--out", analyze_out, "Output directory (default: samples dir)");
  auto* kstar_opt = analyze->add_option("--k-star", analyze_params.k_star,
                                        "Representative K (default: posterior mode)");
  analyze->add_option("--draws", analyze_params.draws, "Predictive draws per retained sample");
  analyze->add_option("--pseudocount", analyze_params.pseudocount, "CLR pseudocount");
  auto* minbloc_opt = analyze->add_option("--min-bloc-size", analyze_params.min_bloc_size,
                                          "Bloc size threshold (default: from manifest)");
  analyze->add_option("--columns", analyze_columns, "Column remapping, logical=actual[,...]");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  SimSpec spec;
  std::string sim_out;
  simulate->add_option("--k", spec.k_true, "True number of blocs")->required();
  simulate->add_option("--n", spec.n, "Municipalities")->required();
  simulate->add_option("--q", spec.q, "Questions")->required();
  simulate->add_option("--c", spec.c, "Voters per municipality")->required();
  simulate->add_option("--delta", spec.delta, "Dirichlet mixing concentration")->required();
  simulate->add_option("--seed", spec.seed, "RNG seed");
  simulate->add_option("--alpha-shape", spec.alpha_gen.shape, "Generator Gamma shape");
  simulate->add_option("--alpha-scale", spec.alpha_gen.scale, "Generator Gamma scale");
  simulate->add_option("--out", sim_out, "Output directory")->required();

  // recover
  auto* recover = app.add_subcommand("recover", "Run the simulation recovery grid");
  std::string grid_path, recover_out;
  int replicates = 10;
  HyperOpts recover_hyper;
  RunConfig recover_run;
  SweepConfig recover_sweep;
  int recover_min_bloc = 5;
  recover->add_option("--grid", grid_path, "Grid CSV: k_true,n,q,c,delta")->required();
  recover->add_option("--replicates", replicates, "Replicates per cell");
  recover->add_option("--out", recover_out, "Output directory")->required();
  recover->add_option("--iterations", recover_run.iterations, "Iterations per chain");
  recover->add_option("--burn-in", recover_run.burn_in, "Burn-in iterations");
  recover->add_option("--thin", recover_run.thin, "Thinning interval");
  recover->add_option("--seed", recover_run.seed, "Root RNG seed");
  recover->add_option("--bd-time", recover_run.bd_time, "BD process time per iteration");
  recover->add_option("--min-bloc-size", recover_min_bloc, "Bloc size threshold");
  add_hyper_options(recover, recover_hyper);

  CLI11_PARSE(app, argc, argv);

  try {
    if (infer->parsed()) {
      return run_infer(data_path, out_dir, columns, hyper_opts, run_config, sweep_config, params);
    }
    if (analyze->parsed()) {
      return run_analyze(samples_dir, analyze_data, analyze_out, analyze_columns, analyze_params,
                         kstar_opt->count() > 0, minbloc_opt->count() > 0);
    }
    if (simulate->parsed()) {
      return run_simulate(spec, sim_out);
    }
    if (recover->parsed()) {
      return run_recover(grid_path, replicates, recover_out, recover_hyper, recover_run,
                         recover_sweep, recover_min_bloc);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
