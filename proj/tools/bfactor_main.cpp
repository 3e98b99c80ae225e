// Command-line front end: data simulation, model fitting, and reporting.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "bfactor/chain_io.hpp"
#include "bfactor/datagen.hpp"
#include "bfactor/dataset.hpp"
#include "bfactor/gibbs.hpp"
#include "bfactor/parallel.hpp"
#include "bfactor/postsel.hpp"
#include "bfactor/prior.hpp"
#include "bfactor/vi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bfactor;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open '" + path.string() + "'");
  }
  json j;
  in >> j;
  return j;
}

json hyper_json(const Hyperparams& h) {
  return json{{"a", h.a},           {"c1", h.c1},
              {"c2", h.c2},         {"b", h.b},
              {"a_sigma", h.a_sigma}, {"b_sigma", h.b_sigma},
              {"K", h.K}};
}

Hyperparams hyper_from_json(const json& j) {
  Hyperparams h;
  h.a = j.at("a");
  h.c1 = j.at("c1");
  h.c2 = j.at("c2");
  h.b = j.at("b");
  h.a_sigma = j.at("a_sigma");
  h.b_sigma = j.at("b_sigma");
  h.K = j.at("K");
  return h;
}

void write_matrix_bfch(const fs::path& path, const Matrix& m) {
  BfchArray a;
  a.dims = {static_cast<std::uint64_t>(m.rows()),
            static_cast<std::uint64_t>(m.cols())};
  a.draws = 1;
  a.data.assign(m.data(), m.data() + m.size());
  write_bfch(path.string(), a);
}

Matrix read_matrix_bfch(const fs::path& path) {
  const BfchArray a = read_bfch(path.string());
  if (a.dims.size() != 2 || a.draws != 1) {
    throw std::invalid_argument("'" + path.string() +
                                "' does not hold a single matrix");
  }
  return Eigen::Map<const Matrix>(a.data.data(),
                                  static_cast<Index>(a.dims[0]),
                                  static_cast<Index>(a.dims[1]));
}

void write_vector_bfch(const fs::path& path, const Vector& v) {
  BfchArray a;
  a.dims = {static_cast<std::uint64_t>(v.size())};
  a.draws = 1;
  a.data.assign(v.data(), v.data() + v.size());
  write_bfch(path.string(), a);
}

Vector read_vector_bfch(const fs::path& path) {
  const BfchArray a = read_bfch(path.string());
  if (a.dims.size() != 1 || a.draws != 1) {
    throw std::invalid_argument("'" + path.string() +
                                "' does not hold a single vector");
  }
  return Eigen::Map<const Vector>(a.data.data(),
                                  static_cast<Index>(a.dims[0]));
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  int example = 0;
  long n = 100;
  long p = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_simulate(const SimulateArgs& args) {
  fs::create_directories(args.out);
  const fs::path dir(args.out);

  Matrix B0;
  Vector omega0;
  Matrix X;
  long n = args.n, p = args.p;
  if (args.example == 1) {
    auto ex = datagen::synth_example1(args.seed);
    B0 = std::move(ex.B0);
    omega0 = Vector::Ones(ex.data.p());
    X = std::move(ex.data.X);
    n = X.rows();
    p = X.cols();
  } else {
    auto ex = datagen::synth_example2(args.n, args.p, args.seed);
    B0 = std::move(ex.B0);
    omega0 = std::move(ex.omega0);
    X = std::move(ex.data.X);
  }
  save_matrix_csv((dir / "X.csv").string(), X);
  save_matrix_csv((dir / "B0.csv").string(), B0);
  save_matrix_csv((dir / "Omega0.csv").string(), omega0);
  write_json(dir / "truth.json",
             json{{"schema", 1},
                  {"example", args.example},
                  {"n", n},
                  {"p", p},
                  {"K0", B0.cols()},
                  {"seed", args.seed},
                  {"files",
                   {{"X", "X.csv"}, {"B0", "B0.csv"}, {"Omega0", "Omega0.csv"}}},
                  {"note", "Sigma0 = B0 B0' + diag(Omega0)"}});
  std::cout << "wrote " << (dir / "X.csv").string() << " (" << n << " x " << p
            << ")\n";
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  std::string method;
  std::string data;
  std::string out;
  bool standardize = false;
  bool store_latents = false;
  Hyperparams h;
  gibbs::GibbsConfig gcfg;
  vi::VIConfig vcfg;
  std::uint64_t seed = 0;
  int threads = 0;
};

int run_fit(const FitArgs& args) {
  Dataset d = load_matrix(args.data);
  if (args.standardize) d = standardize(d, true, true);
  args.h.validate();
  if (!args.h.theory_valid()) {
    std::cerr << "warning: hyperparameters violate the a >= 4, "
                 "c1 + c2 > 1/4 support condition\n";
  }

  fs::create_directories(args.out);
  const fs::path dir(args.out);
  json manifest{{"schema", 1},
                {"method", args.method},
                {"data", args.data},
                {"n", d.n()},
                {"p", d.p()},
                {"standardize",
                 {{"center", d.centered}, {"scale", d.scaled}}},
                {"hyperparams", hyper_json(args.h)},
                {"theory_valid", args.h.theory_valid()},
                {"seed", args.seed},
                {"threads", resolve_threads(args.threads)}};

  const auto t0 = std::chrono::steady_clock::now();
  if (args.method == "gibbs") {
    gibbs::GibbsConfig cfg = args.gcfg;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    cfg.store_latents = args.store_latents;
    cfg.validate();
    const auto chain = gibbs::run_chain(d, args.h, cfg);

    BfchArray B;
    B.dims = {static_cast<std::uint64_t>(chain.p),
              static_cast<std::uint64_t>(chain.K)};
    B.draws = static_cast<std::uint64_t>(chain.n_draws());
    B.data = chain.draws_B;
    write_bfch((dir / "B.bfch").string(), B);

    BfchArray s2;
    s2.dims = {static_cast<std::uint64_t>(chain.p)};
    s2.draws = B.draws;
    s2.data = chain.draws_sigma2;
    write_bfch((dir / "sigma2.bfch").string(), s2);

    BfchArray lam;
    lam.dims = {static_cast<std::uint64_t>(chain.K)};
    lam.draws = B.draws;
    lam.data = chain.draws_lambda;
    write_bfch((dir / "lambda.bfch").string(), lam);

    json vars{{"B", "B.bfch"}, {"sigma2", "sigma2.bfch"},
              {"lambda", "lambda.bfch"}};
    if (cfg.store_latents) {
      BfchArray eta;
      eta.dims = {static_cast<std::uint64_t>(chain.K),
                  static_cast<std::uint64_t>(chain.n)};
      eta.draws = B.draws;
      eta.data = chain.draws_eta;
      write_bfch((dir / "eta.bfch").string(), eta);
      BfchArray tau2;
      tau2.dims = B.dims;
      tau2.draws = B.draws;
      tau2.data = chain.draws_tau2;
      write_bfch((dir / "tau2.bfch").string(), tau2);
      BfchArray v;
      v.dims = B.dims;
      v.draws = B.draws;
      v.data = chain.draws_v;
      write_bfch((dir / "v.bfch").string(), v);
      vars["eta"] = "eta.bfch";
      vars["tau2"] = "tau2.bfch";
      vars["v"] = "v.bfch";
    }
    manifest["variables"] = vars;
    manifest["config"] = {{"n_iter", cfg.n_iter},
                          {"n_burn", cfg.n_burn},
                          {"thin", cfg.thin},
                          {"abs_floor", cfg.abs_floor},
                          {"store_latents", cfg.store_latents}};
    manifest["draws"] = chain.n_draws();
  } else {
    vi::VIConfig cfg = args.vcfg;
    cfg.seed = args.seed;
    cfg.threads = args.threads;
    cfg.validate();
    const auto result = vi::run_vi(d, args.h, cfg);
    const auto& s = result.state;

    write_matrix_bfch(dir / "mu.bfch", s.mu);
    BfchArray lam;
    lam.dims = {static_cast<std::uint64_t>(s.p()),
                static_cast<std::uint64_t>(s.K()),
                static_cast<std::uint64_t>(s.K())};
    lam.draws = 1;
    lam.data.reserve(static_cast<std::size_t>(s.p() * s.K() * s.K()));
    for (const auto& L : s.Lambda) {
      lam.data.insert(lam.data.end(), L.data(), L.data() + L.size());
    }
    write_bfch((dir / "lambda_mat.bfch").string(), lam);
    write_vector_bfch(dir / "nu.bfch", s.nu);
    write_vector_bfch(dir / "sig_shape.bfch", s.sig_shape);
    write_vector_bfch(dir / "sig_rate.bfch", s.sig_rate);
    write_matrix_bfch(dir / "w.bfch", s.w);
    write_matrix_bfch(dir / "phi.bfch", s.Phi);

    manifest["variables"] = {{"mu", "mu.bfch"},
                             {"lambda_mat", "lambda_mat.bfch"},
                             {"nu", "nu.bfch"},
                             {"sig_shape", "sig_shape.bfch"},
                             {"sig_rate", "sig_rate.bfch"},
                             {"w", "w.bfch"},
                             {"phi", "phi.bfch"}};
    manifest["config"] = {{"T1", cfg.T1},
                          {"T2", cfg.T2},
                          {"rho0", cfg.rho0},
                          {"decay", cfg.decay},
                          {"mc_samples", cfg.mc_samples},
                          {"tol", cfg.tol},
                          {"max_outer", cfg.max_outer}};
    manifest["outer_iters"] = result.diag.outer_iters;
    manifest["converged"] = result.diag.converged;
    manifest["objective"] = result.diag.objective;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  manifest["wall_seconds"] = wall;
  write_json(dir / "manifest.json", manifest);
  std::cout << "fit written to " << dir.string() << " in " << wall << " s\n";
  return 0;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::string fit_dir;
  std::string truth;
  double level = 0.95;
  double threshold = 1e-4;
  bool include_diagonal = false;
  bool with_ess = false;
  bool sigma_csv = false;
  bool sigma_png = false;
  int threads = 0;
};

Matrix load_truth_sigma(const std::string& path) {
  const fs::path p(path);
  if (p.extension() == ".json") {
    const json truth = read_json(p);
    const fs::path dir = p.parent_path();
    const Matrix B0 =
        load_matrix((dir / truth.at("files").at("B0").get<std::string>())
                        .string())
            .X;
    const Matrix Om =
        load_matrix((dir / truth.at("files").at("Omega0").get<std::string>())
                        .string())
            .X;
    Matrix sigma = B0 * B0.transpose();
    // Omega0.csv holds one variance per row.
    sigma.diagonal() += Eigen::Map<const Vector>(Om.data(), Om.size());
    return sigma;
  }
  return load_matrix(path).X;
}

int run_report(const ReportArgs& args) {
  const fs::path dir(args.fit_dir);
  const json manifest = read_json(dir / "manifest.json");
  const std::string method = manifest.at("method");

  postsel::SelectionReport report;
  report.level = args.level;
  report.threshold = args.threshold;
  report.include_diagonal = args.include_diagonal;

  std::optional<gibbs::GibbsChain> chain;
  if (method == "gibbs") {
    gibbs::GibbsChain c;
    const auto B = read_bfch((dir / "B.bfch").string());
    c.p = static_cast<Index>(B.dims.at(0));
    c.K = static_cast<Index>(B.dims.at(1));
    c.draws_B = std::move(B.data);
    const auto s2 = read_bfch((dir / "sigma2.bfch").string());
    c.draws_sigma2 = std::move(s2.data);
    const auto cfg = manifest.at("config");
    c.n_iter = cfg.at("n_iter");
    c.n_burn = cfg.at("n_burn");
    c.thin = cfg.at("thin");
    c.seed = manifest.at("seed");
    chain = std::move(c);
    report.support_mask =
        postsel::select_support_gibbs(*chain, args.level, args.threads);
    report.Sigma_hat = postsel::covariance_estimate(*chain, args.threads);
  } else {
    vi::VIState s;
    s.mu = read_matrix_bfch(dir / "mu.bfch");
    const auto lam = read_bfch((dir / "lambda_mat.bfch").string());
    const Index p = static_cast<Index>(lam.dims.at(0));
    const Index K = static_cast<Index>(lam.dims.at(1));
    s.Lambda.resize(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) {
      s.Lambda[static_cast<std::size_t>(j)] = Eigen::Map<const Matrix>(
          lam.data.data() + static_cast<std::size_t>(j) *
                                static_cast<std::size_t>(K * K),
          K, K);
    }
    s.nu = read_vector_bfch(dir / "nu.bfch");
    s.sig_shape = read_vector_bfch(dir / "sig_shape.bfch");
    s.sig_rate = read_vector_bfch(dir / "sig_rate.bfch");
    s.w = read_matrix_bfch(dir / "w.bfch");
    s.Phi = read_matrix_bfch(dir / "phi.bfch");
    s.c = (s.sig_shape.array() / s.sig_rate.array()).matrix();
    report.support_mask = postsel::select_support_vi(s, args.level);
    report.Sigma_hat = postsel::covariance_estimate(s);
  }
  report.K_hat = postsel::effective_rank(report.support_mask);

  json out{{"schema", 1},
           {"fit", args.fit_dir},
           {"method", method},
           {"level", args.level},
           {"threshold", args.threshold},
           {"include_diagonal", args.include_diagonal},
           {"K_hat", report.K_hat},
           {"selected_entries",
            static_cast<long>(report.support_mask.count())}};

  if (!args.truth.empty()) {
    const Matrix sigma0 = load_truth_sigma(args.truth);
    const auto [fdr, fnr] = postsel::sparsity_metrics(
        report.Sigma_hat, sigma0, args.threshold, args.include_diagonal);
    report.fdr = fdr;
    report.fnr = fnr;
    report.frob = postsel::frobenius_distance(report.Sigma_hat, sigma0);
    out["fdr"] = fdr;
    out["fnr"] = fnr;
    out["frobenius"] = *report.frob;
  }

  json files = json::object();
  if (args.sigma_csv) {
    save_matrix_csv((dir / "sigma_hat.csv").string(), report.Sigma_hat);
    files["sigma_hat_csv"] = "sigma_hat.csv";
  }
  if (args.sigma_png) {
    postsel::write_png_heatmap((dir / "sigma_hat.png").string(),
                               report.Sigma_hat);
    files["sigma_hat_png"] = "sigma_hat.png";
  }
  if (args.with_ess) {
    if (method != "gibbs") {
      throw std::invalid_argument("--ess requires a gibbs fit");
    }
    const Matrix e = postsel::ess_matrix(*chain, args.threads);
    save_matrix_csv((dir / "ess.csv").string(), e);
    postsel::write_png_heatmap((dir / "ess.png").string(), e);
    files["ess_csv"] = "ess.csv";
    files["ess_png"] = "ess.png";
  }
  out["files"] = files;
  write_json(dir / "report.json", out);
  std::cout << "K_hat = " << report.K_hat;
  if (report.frob) std::cout << ", frobenius = " << *report.frob;
  std::cout << "\nreport written to " << (dir / "report.json").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse Bayesian factor analysis with half-power shrinkage"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate synthetic data");
  simulate->add_option("--example", sim.example, "study design (1 or 2)")
      ->required()
      ->check(CLI::Range(1, 2));
  simulate->add_option("--n", sim.n, "observations (example 2)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--p", sim.p, "dimensions (example 2)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--out", sim.out, "output directory")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "run posterior inference");
  fit_cmd->add_option("--method", fit.method, "gibbs or vi")
      ->required()
      ->check(CLI::IsMember({"gibbs", "vi"}));
  fit_cmd->add_option("--data", fit.data, "CSV observation matrix")
      ->required();
  fit_cmd->add_option("--out", fit.out, "run directory")->required();
  fit_cmd->add_flag("--standardize", fit.standardize,
                    "center and scale columns");
  fit_cmd->add_option("--k", fit.h.K, "truncation level")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--a", fit.h.a, "prior shape offset");
  fit_cmd->add_option("--c1", fit.h.c1, "shape growth exponent");
  fit_cmd->add_option("--c2", fit.h.c2, "rate decay exponent");
  fit_cmd->add_option("--b", fit.h.b, "rate numerator");
  fit_cmd->add_option("--a-sigma", fit.h.a_sigma, "noise prior shape");
  fit_cmd->add_option("--b-sigma", fit.h.b_sigma, "noise prior rate");
  fit_cmd->add_option("--iters", fit.gcfg.n_iter, "Gibbs sweeps");
  fit_cmd->add_option("--burn", fit.gcfg.n_burn, "burn-in sweeps");
  fit_cmd->add_option("--thin", fit.gcfg.thin, "thinning interval");
  fit_cmd->add_flag("--store-latents", fit.store_latents,
                    "also store eta, tau2, v draws");
  fit_cmd->add_option("--t1", fit.vcfg.T1, "natural-gradient inner steps");
  fit_cmd->add_option("--t2", fit.vcfg.T2, "mirror-descent inner steps");
  fit_cmd->add_option("--rho0", fit.vcfg.rho0, "initial step size");
  fit_cmd->add_option("--decay", fit.vcfg.decay, "step size decay");
  fit_cmd->add_option("--mc-samples", fit.vcfg.mc_samples,
                      "dof gradient MC size");
  fit_cmd->add_option("--tol", fit.vcfg.tol, "convergence tolerance");
  fit_cmd->add_option("--max-outer", fit.vcfg.max_outer,
                      "outer iteration cap");
  fit_cmd->add_option("--seed", fit.seed, "RNG seed");
  fit_cmd->add_option("--threads", fit.threads,
                      "worker threads (default: BFACTOR_THREADS or cores)");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "post-selection summary");
  report->add_option("--fit", rep.fit_dir, "fit run directory")->required();
  report->add_option("--truth", rep.truth,
                     "truth manifest JSON or Sigma0 CSV");
  report->add_option("--level", rep.level, "credible level");
  report->add_option("--threshold", rep.threshold,
                     "covariance zero threshold");
  report->add_flag("--include-diagonal", rep.include_diagonal,
                   "count diagonal entries in FDR/FNR");
  report->add_flag("--ess", rep.with_ess, "write per-entry ESS map");
  report->add_flag("--sigma-csv", rep.sigma_csv, "write Sigma_hat as CSV");
  report->add_flag("--sigma-png", rep.sigma_png,
                   "write Sigma_hat heatmap PNG");
  report->add_option("--threads", rep.threads, "worker threads");

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) return run_simulate(sim);
    if (fit_cmd->parsed()) return run_fit(fit);
    if (report->parsed()) {
      if (!(rep.level > 0.0 && rep.level < 1.0)) {
        std::cerr << "error: --level must be in (0, 1)\n";
        return kExitUsage;
      }
      if (!(rep.threshold > 0.0)) {
        std::cerr << "error: --threshold must be positive\n";
        return kExitUsage;
      }
      return run_report(rep);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IngestError& e) {
    std::cerr << "ingestion error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
