#pragma once

/// \file cli.hpp
/// \brief Command layer behind the bayesij executable. Commands run in-process through run_command.

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bayesij/bootstrap.hpp"
#include "bayesij/core.hpp"
#include "bayesij/freq_eval.hpp"
#include "bayesij/io.hpp"
#include "bayesij/kernels.hpp"
#include "bayesij/models.hpp"
#include "bayesij/spectral.hpp"

namespace bayesij {

struct RunConfig {
  std::string command;
  std::string model;
  std::string loglik;
  std::string stats;
  std::string w;
  std::string logprior;
  std::string scores;
  std::string hessian;
  std::string out = ".";
  std::string estimator = "plain";
  std::string method = "first";
  std::string kind = "raw";
  std::string eigen_method = "cholesky";
  double rel_tol = 1e-8;
  Index max_rank = -1;
  Index n_b = 200;
  Index m_star = 0;
  Index a_m = -1;
  std::uint64_t seed = 1;
  int threads = 1;
  double prior_weight = 0.0;
  bool log_scree = false;
  Index n = 0;
  Index M = 0;
};

inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError:
    case ErrorCode::InvalidInput:
    case ErrorCode::Unsupported: return 2;
    case ErrorCode::ParseError: return 3;
    case ErrorCode::NotPSD:
    case ErrorCode::NumericalFailure:
    case ErrorCode::SingularInformation:
    case ErrorCode::DegenerateWeights: return 4;
  }
  return 4;
}

namespace detail {

template <class T>
T parse_setting(const std::string& key, const std::string& value) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    fail(ErrorCode::UsageError, "invalid value '" + value + "' for " + key);
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  fail(ErrorCode::UsageError, "invalid boolean '" + value + "' for " + key);
}

inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "loglik") cfg.loglik = value;
  else if (key == "stats") cfg.stats = value;
  else if (key == "w") cfg.w = value;
  else if (key == "logprior") cfg.logprior = value;
  else if (key == "scores") cfg.scores = value;
  else if (key == "hessian") cfg.hessian = value;
  else if (key == "out") cfg.out = value;
  else if (key == "estimator") cfg.estimator = value;
  else if (key == "method") cfg.method = value;
  else if (key == "kind") cfg.kind = value;
  else if (key == "eigen_method") cfg.eigen_method = value;
  else if (key == "rel_tol") cfg.rel_tol = parse_setting<double>(key, value);
  else if (key == "max_rank") cfg.max_rank = parse_setting<Index>(key, value);
  else if (key == "n_b") cfg.n_b = parse_setting<Index>(key, value);
  else if (key == "m_star") cfg.m_star = parse_setting<Index>(key, value);
  else if (key == "a_m") cfg.a_m = parse_setting<Index>(key, value);
  else if (key == "seed") cfg.seed = parse_setting<std::uint64_t>(key, value);
  else if (key == "threads") cfg.threads = parse_setting<int>(key, value);
  else if (key == "prior_weight") cfg.prior_weight = parse_setting<double>(key, value);
  else if (key == "log_scree") cfg.log_scree = parse_bool(key, value);
  else if (key == "model") cfg.model = value;
  else if (key == "n") cfg.n = parse_setting<Index>(key, value);
  else if (key == "m") cfg.M = parse_setting<Index>(key, value);
  else fail(ErrorCode::UsageError, "unknown setting '" + key + "'");
}

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out) / name;
}

inline void need(const std::string& value, const std::string& flag) {
  if (value.empty()) fail(ErrorCode::UsageError, "missing required option --" + flag);
}

inline LogLikMatrix read_loglik(const RunConfig& cfg) {
  need(cfg.loglik, "loglik");
  return LogLikMatrix(load_matrix(cfg.loglik).values);
}

inline StatMatrix read_stats(const RunConfig& cfg) {
  need(cfg.stats, "stats");
  LoadedMatrix m = load_matrix(cfg.stats);
  if (!m.header.empty() && static_cast<Index>(m.header.size()) != m.values.cols()) m.header.clear();
  return StatMatrix(std::move(m.values), std::move(m.header));
}

inline void check_shapes(const StatMatrix& stats, const LogLikMatrix& loglik) {
  if (stats.M() != loglik.M()) {
    fail(ErrorCode::InvalidInput, "stats shape " + shape(stats.values()) + " and loglik shape " + shape(loglik.values()) +
                                      " disagree on the draw count");
  }
}

inline std::optional<LogPriorVector> read_logprior(const RunConfig& cfg, Index m) {
  if (cfg.logprior.empty()) return std::nullopt;
  LogPriorVector lp{load_vector(cfg.logprior), cfg.prior_weight};
  if (lp.values.size() != m) {
    fail(ErrorCode::InvalidInput, "logprior length " + std::to_string(lp.values.size()) + " does not match draw count " +
                                      std::to_string(m));
  }
  return lp;
}

inline WKind parse_kind(const std::string& kind) {
  if (kind == "raw") return WKind::raw;
  if (kind == "double_centered") return WKind::double_centered;
  fail(ErrorCode::UsageError, "unknown kind '" + kind + "'");
}

inline Matrix read_w(const RunConfig& cfg) {
  if (!cfg.w.empty()) {
    const Matrix w = load_matrix(cfg.w).values;
    if (w.rows() != w.cols()) fail(ErrorCode::InvalidInput, "W must be square, got " + shape(w));
    const double scale = std::max(w.cwiseAbs().maxCoeff(), 1e-300);
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) fail(ErrorCode::InvalidInput, "W is not symmetric");
    return w;
  }
  return build_w(read_loglik(cfg), parse_kind(cfg.kind)).values;
}

inline CholeskyOptions chol_options(const RunConfig& cfg) { return {cfg.rel_tol, cfg.max_rank}; }

inline std::string kv_csv(const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string s = "key,value\n";
  for (const auto& [k, v] : rows) s += k + "," + v + "\n";
  return s;
}

inline Matrix column(const std::vector<double>& v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Index>(i), 0) = v[i];
  return m;
}

inline void write_basis_outputs(const RunConfig& cfg, const PivotedCholesky& chol, const SpectralBasis& basis) {
  save_matrix(out_path(cfg, "eigenvalues.csv"), Matrix(basis.eigenvalues), {"eigenvalue"});
  save_matrix(out_path(cfg, "eigenvectors.csv"), basis.vectors, numbered_header("u", basis.vectors.cols()));
  std::string piv = "step,pivot,residual_trace\n";
  for (std::size_t k = 0; k < chol.pivots.size(); ++k) {
    piv += std::to_string(k + 1) + "," + std::to_string(chol.pivots[k] + 1) + "," +
           format_number(chol.residual_trace_history[k]) + "\n";
  }
  write_text(out_path(cfg, "cholesky_pivots.csv"), piv);
  std::string tr = "step,residual_trace,fraction\n";
  const double tw = chol.trace_w;
  tr += "0," + format_number(tw) + "," + format_number(tw > 0 ? 1.0 : 0.0) + "\n";
  for (std::size_t k = 0; k < chol.residual_trace_history.size(); ++k) {
    const double r = chol.residual_trace_history[k];
    tr += std::to_string(k + 1) + "," + format_number(r) + "," + format_number(tw > 0 ? r / tw : 0.0) + "\n";
  }
  write_text(out_path(cfg, "residual_trace.csv"), tr);
  write_text(out_path(cfg, "scree.svg"), scree_svg(basis.eigenvalues, cfg.log_scree));
}

inline int cmd_eigen(const RunConfig& cfg) {
  const Matrix w = read_w(cfg);
  const PivotedCholesky chol = incomplete_cholesky(w, chol_options(cfg));
  SpectralBasis basis;
  if (cfg.eigen_method == "cholesky") basis = dual_eigen(chol);
  else if (cfg.eigen_method == "full") basis = full_eigen(w);
  else fail(ErrorCode::UsageError, "unknown eigen method '" + cfg.eigen_method + "'");
  write_basis_outputs(cfg, chol, basis);
  return 0;
}

inline SpectralBasis basis_for(const RunConfig& cfg, const LogLikMatrix& loglik, PivotedCholesky* chol_out = nullptr) {
  const LogLikMatrix src = cfg.m_star > 0 ? subsample_draws(loglik, cfg.m_star, cfg.seed ^ 0x5AB5A3BULL) : loglik;
  const WMatrix w = build_w(src, parse_kind(cfg.kind));
  PivotedCholesky chol = incomplete_cholesky(w, chol_options(cfg));
  SpectralBasis basis = cfg.eigen_method == "full" ? full_eigen(w) : dual_eigen(chol);
  if (chol_out != nullptr) *chol_out = std::move(chol);
  return basis;
}

inline Index retained(const RunConfig& cfg, const SpectralBasis& basis) {
  if (cfg.a_m < 0) return basis.vectors.cols();
  if (cfg.a_m > basis.vectors.cols()) {
    fail(ErrorCode::InvalidInput, "a_m = " + std::to_string(cfg.a_m) + " exceeds available rank " + std::to_string(basis.vectors.cols()));
  }
  return cfg.a_m;
}

inline int cmd_freqcov(const RunConfig& cfg) {
  const LogLikMatrix loglik = read_loglik(cfg);
  const StatMatrix stats = read_stats(cfg);
  check_shapes(stats, loglik);
  const auto lp = read_logprior(cfg, loglik.M());
  CovEstimator est;
  if (cfg.estimator == "plain") est = CovEstimator::plain;
  else if (cfg.estimator == "centered") est = CovEstimator::centered;
  else if (cfg.estimator == "prior_adjusted") est = CovEstimator::prior_adjusted;
  else if (cfg.estimator == "projected") est = CovEstimator::projected;
  else fail(ErrorCode::UsageError, "unknown estimator '" + cfg.estimator + "'");
  std::optional<ProjectedLogLik> proj;
  double tail = 0.0;
  if (est == CovEstimator::projected) {
    const SpectralBasis basis = basis_for(cfg, loglik);
    const Index a = retained(cfg, basis);
    proj = project_loglik(loglik, basis, a);
    tail = basis.tail_sum(a) + basis.residual_trace;
  }
  if (est == CovEstimator::prior_adjusted && !lp) fail(ErrorCode::UsageError, "prior_adjusted estimator needs --logprior");
  const FreqCovEstimate sigma = freq_cov(stats, loglik, est, lp ? &*lp : nullptr, proj ? &*proj : nullptr);
  save_matrix(out_path(cfg, "sigma.csv"), sigma.values, stats.names());
  std::vector<std::pair<std::string, std::string>> meta = {
      {"estimator", to_string(est)},
      {"rank_used", sigma.rank_used < 0 ? std::string("full") : std::to_string(sigma.rank_used)},
      {"n", std::to_string(loglik.n())},
      {"M", std::to_string(loglik.M())},
      {"p", std::to_string(stats.p())},
  };
  if (proj) meta.emplace_back("residual_eigen_tail", format_number(tail));
  write_text(out_path(cfg, "metadata.csv"), kv_csv(meta));
  return 0;
}

inline void write_boot_outputs(const RunConfig& cfg, const BootstrapRun& run, const StatMatrix& stats,
                               const ImportanceDiagnostics* diag) {
  std::vector<std::string> header = {"replicate"};
  for (const auto& s : stats.names()) header.push_back(s);
  Matrix est(run.estimates.rows(), run.estimates.cols() + 1);
  for (Index b = 0; b < run.estimates.rows(); ++b) {
    est(b, 0) = static_cast<double>(b + 1);
    est.row(b).tail(run.estimates.cols()) = run.estimates.row(b);
  }
  write_text(out_path(cfg, "estimates.csv"), matrix_to_csv(est, header));
  const BootSummary s = summarize(run);
  std::string sum = "stat,mean,var,q10,q25,q75,q90,used,flagged\n";
  for (Index j = 0; j < run.estimates.cols(); ++j) {
    sum += stats.names()[static_cast<std::size_t>(j)] + "," + format_number(s.mean[j]) + "," + format_number(s.var[j]) + "," +
           format_number(s.q10[j]) + "," + format_number(s.q25[j]) + "," + format_number(s.q75[j]) + "," +
           format_number(s.q90[j]) + "," + std::to_string(s.used) + "," + std::to_string(s.flagged) + "\n";
  }
  write_text(out_path(cfg, "summary.csv"), sum);
  if (diag != nullptr) {
    std::string d = "replicate,max_weight,ess,degenerate\n";
    for (Index b = 0; b < diag->max_weight.size(); ++b) {
      d += std::to_string(b + 1) + "," + format_number(diag->max_weight[b]) + "," + format_number(diag->ess[b]) + "," +
           std::to_string(static_cast<int>(run.degenerate[static_cast<std::size_t>(b)])) + "\n";
    }
    write_text(out_path(cfg, "is_diagnostics.csv"), d);
  }
}

inline int cmd_boot(const RunConfig& cfg) {
  if (cfg.n_b <= 0) fail(ErrorCode::UsageError, "n_b must be at least 1");
  if (cfg.threads < 1) fail(ErrorCode::UsageError, "threads must be at least 1");
  const LogLikMatrix loglik = read_loglik(cfg);
  const StatMatrix stats = read_stats(cfg);
  check_shapes(stats, loglik);
  const auto resamples = draw_resamples(loglik.n(), cfg.n_b, cfg.seed);
  BootOptions opt;
  opt.threads = cfg.threads;
  opt.seed = cfg.seed;
  const std::string& m = cfg.method;
  std::optional<ProjectedLogLik> proj;
  if (m == "first_projected" || m == "second_projected") {
    const SpectralBasis basis = basis_for(cfg, loglik);
    proj = project_loglik(loglik, basis, retained(cfg, basis));
  }
  if (m == "first") {
    write_boot_outputs(cfg, boot_first(stats, loglik, resamples, opt), stats, nullptr);
  } else if (m == "first_projected") {
    write_boot_outputs(cfg, boot_first(stats, loglik, resamples, opt, &*proj), stats, nullptr);
  } else if (m == "second_direct" || m == "second_efficient" || m == "second_auto" || m == "second_projected") {
    const SecondMode mode = m == "second_direct"      ? SecondMode::direct
                            : m == "second_efficient" ? SecondMode::efficient
                            : m == "second_auto"      ? SecondMode::automatic
                                                      : SecondMode::projected;
    write_boot_outputs(cfg, boot_second(stats, loglik, resamples, mode, proj ? &*proj : nullptr, opt), stats, nullptr);
  } else if (m == "importance") {
    const ImportanceResult r = boot_importance(stats, loglik, resamples, opt);
    write_boot_outputs(cfg, r.run, stats, &r.diagnostics);
  } else {
    fail(ErrorCode::UsageError, "unknown bootstrap method '" + m + "'");
  }
  return 0;
}

inline int cmd_rep(const RunConfig& cfg) {
  const Matrix w = read_w(cfg);
  const PivotedCholesky chol = incomplete_cholesky(w, chol_options(cfg));
  std::string s = "rank,index,residual_trace\n";
  for (std::size_t k = 0; k < chol.pivots.size(); ++k) {
    s += std::to_string(k + 1) + "," + std::to_string(chol.pivots[k] + 1) + "," + format_number(chol.residual_trace_history[k]) + "\n";
  }
  write_text(out_path(cfg, "representative_indices.csv"), s);
  return 0;
}

inline int cmd_diag(const RunConfig& cfg) {
  const LogLikMatrix loglik = read_loglik(cfg);
  const auto lp = read_logprior(cfg, loglik.M());
  std::optional<InfoMatrices> info;
  if (!cfg.scores.empty() || !cfg.hessian.empty()) {
    need(cfg.scores, "scores");
    need(cfg.hessian, "hessian");
    ScoreMatrix s{load_matrix(cfg.scores).values, load_matrix(cfg.hessian).values};
    if (s.values.rows() != loglik.n()) {
      fail(ErrorCode::InvalidInput, "scores shape " + shape(s.values) + " does not match loglik shape " + shape(loglik.values()));
    }
    info = build_info_matrices(s);
  }
  const PenaltyReport pen = penalties(loglik, lp ? &*lp : nullptr, info ? &*info : nullptr);
  std::string p = "penalty,value\nwaic," + format_number(pen.waic_penalty) + "\n";
  if (pen.tic_penalty) p += "tic," + format_number(*pen.tic_penalty) + "\n";
  if (pen.pcic_penalty) p += "pcic," + format_number(*pen.pcic_penalty) + "\n";
  write_text(out_path(cfg, "penalties.csv"), p);
  std::string c = "stat,value,scale\n";
  if (!cfg.stats.empty()) {
    const StatMatrix stats = read_stats(cfg);
    check_shapes(stats, loglik);
    const CenteringReport rep = centering_diagnostic(stats, loglik, lp ? &*lp : nullptr);
    for (Index j = 0; j < stats.p(); ++j) {
      c += stats.names()[static_cast<std::size_t>(j)] + "," + format_number(rep.value[j]) + "," + format_number(rep.scale[j]) + "\n";
    }
  }
  write_text(out_path(cfg, "centering.csv"), c);
  return 0;
}

inline int cmd_zmat(const RunConfig& cfg) {
  LogLikMatrix loglik = read_loglik(cfg);
  if (cfg.m_star > 0) loglik = subsample_draws(loglik, cfg.m_star, cfg.seed);
  if (loglik.M() > EigenOptions{}.max_n) {
    fail(ErrorCode::InvalidInput, "Z would be " + std::to_string(loglik.M()) + "x" + std::to_string(loglik.M()) +
                                      "; pass --m-star to subsample draws");
  }
  const DualityReport rep = duality_report(loglik);
  save_matrix(out_path(cfg, "z_eigenvalues.csv"), Matrix(rep.z_eigenvalues), {"eigenvalue"});
  write_text(out_path(cfg, "duality_report.csv"),
             kv_csv({{"n", std::to_string(loglik.n())},
                     {"M", std::to_string(loglik.M())},
                     {"nonzero_z", std::to_string(rep.z_eigenvalues.size())},
                     {"nonzero_wc", std::to_string(rep.wc_eigenvalues.size())},
                     {"max_rel_diff", format_number(rep.max_rel_diff)},
                     {"z_identity_residual", format_number(rep.z_identity_residual)},
                     {"wc_identity_residual", format_number(rep.wc_identity_residual)}}));
  return 0;
}

inline McmcConfig demo_mcmc(const RunConfig& cfg, Index draws) {
  McmcConfig m;
  m.seed = cfg.seed;
  m.chains = 4;
  m.iters = static_cast<int>((draws + 3) / 4);
  m.burn_in = 1000;
  return m;
}

inline int cmd_demo(const RunConfig& cfg) {
  ModelBundle b;
  if (cfg.model == "weibull") {
    WeibullConfig w;
    if (cfg.n > 0) w.n = cfg.n;
    w.data_seed = cfg.seed;
    w.mcmc = demo_mcmc(cfg, cfg.M > 0 ? cfg.M : 4000);
    b = run_weibull(w);
  } else if (cfg.model == "betabinom") {
    BetaBinomialConfig c;
    if (cfg.n > 0) c.n = cfg.n;
    if (cfg.M > 0) c.M = cfg.M;
    c.seed = cfg.seed;
    b = run_betabinomial(c);
  } else if (cfg.model == "normal") {
    NormalMeanConfig c;
    if (cfg.n > 0) c.n = cfg.n;
    if (cfg.M > 0) c.M = cfg.M;
    c.seed = cfg.seed;
    b = run_normal_mean(c);
  } else if (cfg.model == "regression") {
    RegressionConfig c;
    if (cfg.n > 0) c.n = cfg.n;
    c.seed = cfg.seed;
    c.mcmc = demo_mcmc(cfg, cfg.M > 0 ? cfg.M : 8000);
    b = run_regression(c);
  } else {
    fail(ErrorCode::UsageError, "unknown demo model '" + cfg.model + "' (weibull, betabinom, normal, regression)");
  }
  save_matrix(out_path(cfg, "data.csv"), Matrix(b.data), {"x"});
  if (b.covariates.size() > 0) save_matrix(out_path(cfg, "covariates.csv"), Matrix(b.covariates), {"z"});
  save_matrix(out_path(cfg, "draws.csv"), b.draws, b.param_names);
  save_matrix(out_path(cfg, "loglik.csv"), b.loglik.values(), numbered_header("obs", b.loglik.n()));
  save_matrix(out_path(cfg, "logprior.csv"), Matrix(b.logprior.values), {"logprior"});
  const WMatrix w = build_w(b.loglik);
  const SpectralBasis basis = full_eigen(w);
  save_matrix(out_path(cfg, "eigenvalues.csv"), Matrix(basis.eigenvalues), {"eigenvalue"});
  write_text(out_path(cfg, "scree.svg"), scree_svg(basis.eigenvalues, cfg.log_scree));
  std::optional<InfoMatrices> info;
  if (b.scores) info = build_info_matrices(*b.scores, std::nullopt, 0.0, std::nullopt, b.theta_hat);
  const PenaltyReport pen = penalties(b.loglik, &b.logprior, info ? &*info : nullptr);
  const double tw = w.trace();
  auto top = [&](Index k) {
    double s = 0.0;
    for (Index a = 0; a < std::min<Index>(k, basis.eigenvalues.size()); ++a) s += basis.eigenvalues[a];
    return tw > 0 ? s / tw : 0.0;
  };
  std::vector<std::pair<std::string, std::string>> rep = {
      {"model", b.model},
      {"n", std::to_string(b.loglik.n())},
      {"M", std::to_string(b.loglik.M())},
      {"acceptance_rate", format_number(b.acceptance_rate)},
      {"trace_w", format_number(tw)},
      {"top1_fraction", format_number(top(1))},
      {"top2_fraction", format_number(top(2))},
      {"top4_fraction", format_number(top(4))},
      {"waic_penalty", format_number(pen.waic_penalty)},
  };
  if (pen.tic_penalty) rep.emplace_back("tic_penalty", format_number(*pen.tic_penalty));
  if (pen.pcic_penalty) rep.emplace_back("pcic_penalty", format_number(*pen.pcic_penalty));
  const Vector mean = posterior_mean(b.draws);
  for (std::size_t k = 0; k < b.param_names.size(); ++k) {
    rep.emplace_back("posterior_mean_" + b.param_names[k], format_number(mean[static_cast<Index>(k)]));
    rep.emplace_back("theta_hat_" + b.param_names[k], format_number(b.theta_hat[static_cast<Index>(k)]));
  }
  rep.emplace_back("warnings", std::to_string(b.warnings.size()));
  write_text(out_path(cfg, "report.csv"), kv_csv(rep));
  return 0;
}

}  // namespace detail

/// Executes one command; errors are reported on err and mapped to exit codes.
inline int run_command(const RunConfig& cfg, std::ostream& err = std::cerr) {
  try {
    if (cfg.threads < 1) fail(ErrorCode::UsageError, "threads must be at least 1");
    if (cfg.command == "eigen") return detail::cmd_eigen(cfg);
    if (cfg.command == "freqcov") return detail::cmd_freqcov(cfg);
    if (cfg.command == "boot") return detail::cmd_boot(cfg);
    if (cfg.command == "rep") return detail::cmd_rep(cfg);
    if (cfg.command == "diag") return detail::cmd_diag(cfg);
    if (cfg.command == "zmat") return detail::cmd_zmat(cfg);
    if (cfg.command == "demo") return detail::cmd_demo(cfg);
    fail(ErrorCode::UsageError, "unknown command '" + cfg.command + "'");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
}

/// Parses arguments with precedence config file < environment < flags, then runs the command.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"bayesij: posterior covariance W, its principal space, and frequentist evaluation of Bayesian estimators"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "flat key = value settings file");

  struct Flag {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
  };
  std::deque<Flag> flags;
  auto add = [&](CLI::App* sub, const std::string& key, const std::string& help) {
    flags.push_back({key, "", nullptr});
    std::string name = "--" + key;
    for (auto& ch : name)
      if (ch == '_') ch = '-';
    flags.back().opt = sub->add_option(name, flags.back().value, help);
  };
  auto common = [&](CLI::App* sub) {
    add(sub, "out", "output directory");
    add(sub, "threads", "worker thread cap");
    add(sub, "seed", "64-bit RNG seed");
  };
  auto spectral_opts = [&](CLI::App* sub) {
    add(sub, "rel_tol", "Cholesky stopping tolerance relative to tr W");
    add(sub, "max_rank", "Cholesky rank cap");
    add(sub, "kind", "raw | double_centered");
    add(sub, "eigen_method", "cholesky | full");
  };

  CLI::App* eigen = app.add_subcommand("eigen", "eigenvalues, eigenvectors and Cholesky pivots of W");
  common(eigen);
  spectral_opts(eigen);
  add(eigen, "loglik", "M x n log-likelihood CSV");
  add(eigen, "w", "n x n W CSV");
  add(eigen, "log_scree", "log-scale bars in scree.svg");
  flags.back().opt->expected(0, 1);

  CLI::App* freqcov = app.add_subcommand("freqcov", "frequentist covariance estimators");
  common(freqcov);
  spectral_opts(freqcov);
  add(freqcov, "loglik", "M x n log-likelihood CSV");
  add(freqcov, "stats", "M x p statistics CSV");
  add(freqcov, "logprior", "length-M log-prior CSV");
  add(freqcov, "prior_weight", "prior strength");
  add(freqcov, "estimator", "plain | centered | prior_adjusted | projected");
  add(freqcov, "a_m", "retained rank for projected");
  add(freqcov, "m_star", "draw subsample size for W");

  CLI::App* boot = app.add_subcommand("boot", "approximate bootstraps");
  common(boot);
  spectral_opts(boot);
  add(boot, "loglik", "M x n log-likelihood CSV");
  add(boot, "stats", "M x p statistics CSV");
  add(boot, "method", "first | first_projected | second_direct | second_efficient | second_auto | second_projected | importance");
  add(boot, "n_b", "bootstrap replicates");
  add(boot, "a_m", "retained rank for projected methods");
  add(boot, "m_star", "draw subsample size for W");

  CLI::App* rep = app.add_subcommand("rep", "representative observation set");
  common(rep);
  spectral_opts(rep);
  add(rep, "loglik", "M x n log-likelihood CSV");
  add(rep, "w", "n x n W CSV");

  CLI::App* diag = app.add_subcommand("diag", "WAIC/TIC/PCIC penalties and centering diagnostics");
  common(diag);
  add(diag, "loglik", "M x n log-likelihood CSV");
  add(diag, "stats", "M x p statistics CSV");
  add(diag, "logprior", "length-M log-prior CSV");
  add(diag, "prior_weight", "prior strength");
  add(diag, "scores", "n x k score CSV");
  add(diag, "hessian", "k x k averaged negative Hessian CSV");

  CLI::App* zmat = app.add_subcommand("zmat", "Z matrix spectrum and duality with W^c");
  common(zmat);
  add(zmat, "loglik", "M x n log-likelihood CSV");
  add(zmat, "m_star", "draw subsample size");

  CLI::App* demo = app.add_subcommand("demo", "run a built-in model end to end");
  common(demo);
  std::string model;
  demo->add_option("model", model, "weibull | betabinom | normal | regression")->required();
  add(demo, "n", "observation count");
  add(demo, "m", "posterior draw count");
  add(demo, "log_scree", "log-scale bars in scree.svg");
  flags.back().opt->expected(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  RunConfig cfg;
  try {
    for (CLI::App* sub : app.get_subcommands()) cfg.command = sub->get_name();
    if (!config_path.empty()) {
      for (const auto& [k, v] : load_config(config_path)) detail::apply_setting(cfg, k, v);
    }
    if (const char* env = std::getenv("BAYESIJ_OUT"); env != nullptr && *env != '\0') detail::apply_setting(cfg, "out", env);
    if (const char* env = std::getenv("BAYESIJ_THREADS"); env != nullptr && *env != '\0') {
      detail::apply_setting(cfg, "threads", env);
    }
    for (const Flag& f : flags) {
      if (f.opt->count() > 0) {
        std::string v = f.value;
        if (f.key == "log_scree" && v.empty()) v = "true";
        detail::apply_setting(cfg, f.key, v);
      }
    }
    if (cfg.command == "demo") cfg.model = model;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  }
  return run_command(cfg, err);
}

}  // namespace bayesij
