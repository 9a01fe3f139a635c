#pragma once

// Simulation drivers behind the dropout-sgd-infer CLI. Each runner is a pure
// function of its ExperimentConfig (seed included) and returns typed rows;
// write_csv turns them into the documented CSV schemas.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dropout_sgd/errors.hpp"
#include "dropout_sgd/gd_dropout.hpp"
#include "dropout_sgd/inference.hpp"
#include "dropout_sgd/linalg.hpp"
#include "dropout_sgd/longrun_cov.hpp"
#include "dropout_sgd/randgen.hpp"
#include "dropout_sgd/sgd_dropout.hpp"

namespace dsgd {

struct ExperimentConfig {
  std::size_t d = 3;
  double p = 0.9;
  std::vector<double> alpha{0.01};
  std::size_t n = 200000;
  std::size_t runs = 200;
  double c = 1.0;
  double zeta = 2.0;
  double omega = 0.05;
  std::uint64_t seed = 20240601;
  std::size_t scale = 1;
  std::vector<std::size_t> checkpoints;  // empty: command default
  std::string out_dir = ".";
  std::size_t draws = 500;          // dropout draws for r̂² (contraction)
  std::size_t design_rows = 100;    // fixed-design rows for AGD traces
  std::size_t burn_in = 0;
  std::size_t threads = 0;          // 0: hardware concurrency
  bool oracle = false;              // cov-convergence: i.i.d. input with known Σ
  JointQuantile joint_rule = JointQuantile::HalfOmega;

  // n after --scale.
  std::size_t steps() const { return n / scale; }

  void validate() const {
    if (d < 1) throw ParameterError("config: d must be >= 1");
    detail::require_probability(p, "config");
    if (alpha.empty()) throw ParameterError("config: alpha list is empty");
    for (double a : alpha)
      if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("config: alpha must be positive");
    if (n < 1 || runs < 1 || scale < 1 || draws < 1 || design_rows < 1)
      throw ParameterError("config: counts must be positive");
    if (steps() < 1) throw ParameterError("config: n / scale must be >= 1");
    if (!(omega > 0.0 && omega < 1.0)) throw ParameterError("config: omega must lie in (0,1)");
    BlockSchedule check(c, zeta);
    (void)check;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      if (checkpoints[i] < 1 || checkpoints[i] > n) throw ParameterError("config: checkpoints must lie in [1, n]");
      if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
        throw ParameterError("config: checkpoints must be strictly ascending");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  if (!in || !(in >> std::ws).eof()) throw ParameterError("config: bad value for " + key + ": '" + text + "'");
  if constexpr (std::is_unsigned_v<T>)
    if (trim(text).starts_with("-")) throw ParameterError("config: " + key + " must be non-negative");
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
  }
  if (out.empty()) throw ParameterError("config: empty list for " + key);
  return out;
}

}  // namespace detail

// Applies one key=value setting; keys mirror the CLI flags.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key_in, const std::string& value_in) {
  const std::string key = detail::trim(key_in), value = detail::trim(value_in);
  using detail::parse_list;
  using detail::parse_number;
  if (key == "d") cfg.d = parse_number<std::size_t>(key, value);
  else if (key == "p") cfg.p = parse_number<double>(key, value);
  else if (key == "alpha") cfg.alpha = parse_list<double>(key, value);
  else if (key == "n") cfg.n = parse_number<std::size_t>(key, value);
  else if (key == "runs") cfg.runs = parse_number<std::size_t>(key, value);
  else if (key == "c") cfg.c = parse_number<double>(key, value);
  else if (key == "zeta") cfg.zeta = parse_number<double>(key, value);
  else if (key == "omega") cfg.omega = parse_number<double>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "scale") cfg.scale = parse_number<std::size_t>(key, value);
  else if (key == "checkpoints") cfg.checkpoints = parse_list<std::size_t>(key, value);
  else if (key == "out") cfg.out_dir = value;
  else if (key == "draws") cfg.draws = parse_number<std::size_t>(key, value);
  else if (key == "design_rows") cfg.design_rows = parse_number<std::size_t>(key, value);
  else if (key == "burn_in") cfg.burn_in = parse_number<std::size_t>(key, value);
  else if (key == "threads") cfg.threads = parse_number<std::size_t>(key, value);
  else if (key == "oracle") cfg.oracle = value == "1" || value == "true";
  else if (key == "joint_quantile") {
    if (value == "half_omega") cfg.joint_rule = JointQuantile::HalfOmega;
    else if (value == "conventional") cfg.joint_rule = JointQuantile::Conventional;
    else throw ParameterError("config: joint_quantile must be half_omega or conventional");
  } else {
    throw ParameterError("config: unknown key '" + key + "'");
  }
}

// Flat key=value lines; '#' starts a comment.
inline void load_config_text(ExperimentConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParameterError("config line " + std::to_string(lineno) + ": expected key=value");
    try {
      apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ParameterError& e) {
      throw ParameterError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void load_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  load_config_text(cfg, buf.str());
}

// Checkpoints after --scale. Default grid: n minus {100k, 50k, 20k, 10k, 0},
// or the fractions {0.5, 0.75, 0.9, 0.95, 1} of n when n <= 100k.
inline std::vector<std::size_t> coverage_checkpoints(const ExperimentConfig& cfg) {
  std::vector<std::size_t> raw = cfg.checkpoints;
  if (raw.empty()) {
    if (cfg.n > 100000) {
      for (std::size_t off : {100000, 50000, 20000, 10000, 0}) raw.push_back(cfg.n - off);
    } else {
      for (double f : {0.5, 0.75, 0.9, 0.95, 1.0})
        raw.push_back(static_cast<std::size_t>(std::llround(f * static_cast<double>(cfg.n))));
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t v : raw) {
    const std::size_t s = v / cfg.scale;
    if (s >= 1 && (out.empty() || s > out.back())) out.push_back(s);
  }
  return out;
}

// Ten equispaced checkpoints up to n, after --scale.
inline std::vector<std::size_t> trace_checkpoints(const ExperimentConfig& cfg) {
  if (!cfg.checkpoints.empty()) return coverage_checkpoints(cfg);
  std::vector<std::size_t> out;
  const std::size_t n = cfg.steps();
  for (std::size_t i = 1; i <= 10; ++i) {
    const std::size_t v = n * i / 10;
    if (v >= 1 && (out.empty() || v > out.back())) out.push_back(v);
  }
  return out;
}

inline std::size_t worker_count(const ExperimentConfig& cfg, std::size_t jobs) {
  std::size_t t = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(t, jobs));
}

// Runs job(r) for r in [0, count) across workers; job writes only its own slot.
inline void for_each_replication(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
  if (workers <= 1) {
    for (std::size_t r = 0; r < count; ++r) job(r);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t r = w; r < count; r += workers) job(r);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string fmt_count(std::size_t v) { return std::to_string(v); }

inline std::string to_csv(const CsvTable& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << to_csv(t);
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// contraction: r̂² just below and above the learning-rate bound

inline constexpr double kContractionFactors[] = {0.99, 1.02};

struct ContractionRow {
  std::size_t rep;
  double factor;
  std::size_t n, d;
  double p, alpha, bound, r2_hat;
};

inline std::vector<ContractionRow> run_contraction(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t rows = cfg.steps();
  if (rows < cfg.d) throw ParameterError("contraction: need n >= d design rows");
  std::vector<std::vector<ContractionRow>> per(cfg.runs);
  for_each_replication(cfg.runs, worker_count(cfg, cfg.runs), [&](std::size_t r) {
    RngStream rng(cfg.seed, r);
    const FixedDesignData data = gen_fixed_design(rows, cfg.d, Vector(cfg.d), rng);
    const Matrix gram = symmetrize(data.X.transpose() * data.X);
    const double bound = lr_bound_gd(gram);
    for (double f : kContractionFactors) {
      const double a = f * bound;
      per[r].push_back({r, f, rows, cfg.d, cfg.p, a, bound, empirical_contraction_sq(gram, cfg.p, a, cfg.draws, rng)});
    }
  });
  std::vector<ContractionRow> out;
  for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
  return out;
}

inline CsvTable contraction_table(const std::vector<ContractionRow>& rows) {
  CsvTable t{{"n", "d", "p", "alpha", "bound", "r2_hat"}, {}};
  for (const auto& r : rows)
    t.rows.push_back({fmt_count(r.n), fmt_count(r.d), fmt_real(r.p), fmt_real(r.alpha), fmt_real(r.bound),
                      fmt_real(r.r2_hat)});
  return t;
}

// ---------------------------------------------------------------------------
// coverage: R replications of ASGD dropout with online CIs

enum class CoverageMode { Coordinate, Projection, Joint };

inline const char* mode_name(CoverageMode m) {
  switch (m) {
    case CoverageMode::Coordinate: return "coordinate";
    case CoverageMode::Projection: return "projection";
    case CoverageMode::Joint: return "joint";
  }
  return "?";
}

struct CoverageRow {
  std::size_t checkpoint_n;
  std::string mode;
  double coverage;
  double se;
};

struct CoverageResult {
  double alpha;
  Admissibility admissibility;
  std::vector<CoverageRow> rows;  // warning row first when α is inadmissible

  // Row for (checkpoint, mode); throws if absent.
  const CoverageRow& at(std::size_t checkpoint, CoverageMode mode) const {
    for (const auto& r : rows)
      if (r.checkpoint_n == checkpoint && r.mode == mode_name(mode)) return r;
    throw ContractError("coverage: no row for checkpoint " + std::to_string(checkpoint));
  }
};

inline constexpr std::size_t kAdmissibilityDraws = 20000;

// Per-replication hit indicators: [checkpoint][mode].
struct ReplicationHits {
  std::vector<double> coordinate;  // fraction of coordinates covered
  std::vector<bool> projection;
  std::vector<bool> joint;
};

inline ReplicationHits coverage_replication(const ExperimentConfig& cfg, double alpha,
                                            const std::vector<std::size_t>& checkpoints, std::size_t rep) {
  const std::size_t d = cfg.d;
  const Vector beta_star = equispaced_beta(d);
  const Vector v(std::vector<double>(d, 1.0 / std::sqrt(static_cast<double>(d))));
  RngStream rng(cfg.seed, rep);
  SgdState state = SgdState::zero(d);
  CovState cov(d, BlockSchedule(cfg.c, cfg.zeta));
  StreamSample sample;
  DropoutMask mask;
  ReplicationHits hits;
  std::size_t next = 0;
  const std::size_t n = checkpoints.back();
  for (std::size_t k = 1; k <= n; ++k) {
    stream_sample_into(sample, beta_star, rng);
    sample_dropout_into(mask, d, cfg.p, rng);
    sgd_step_inplace(alpha, state, sample, mask);
    if (k <= cfg.burn_in) continue;
    cov.update(state.beta);
    if (k != checkpoints[next]) continue;
    ++next;
    const Matrix sigma = cov.finalize();
    const Vector& mean = cov.mean();
    const std::size_t m = cov.n();
    std::size_t covered = 0;
    for (std::size_t j = 0; j < d; ++j)
      covered += ci_coordinate(mean[j], sigma(j, j), m, cfg.omega).contains(beta_star[j]) ? 1 : 0;
    hits.coordinate.push_back(static_cast<double>(covered) / static_cast<double>(d));
    hits.projection.push_back(ci_projection(mean, sigma, m, cfg.omega, v).contains(dot(v, beta_star)));
    bool inside = false;
    try {
      inside = joint_region_contains(make_joint_region(mean, sigma, m, cfg.omega, cfg.joint_rule), beta_star).contained;
    } catch (const SingularMatrixError&) {
      inside = false;  // degenerate Σ̂ (too few blocks): no finite region
    }
    hits.joint.push_back(inside);
  }
  return hits;
}

// Standard-normal design draws for the admissibility check, on a stream
// disjoint from every replication.
inline std::vector<Vector> design_draws(std::size_t d, std::uint64_t seed, std::size_t count) {
  RngStream rng(seed, ~std::uint64_t{0});
  std::vector<Vector> out(count, Vector(d));
  for (auto& x : out)
    for (std::size_t j = 0; j < d; ++j) x[j] = rng.normal();
  return out;
}

inline Admissibility check_admissibility(const ExperimentConfig& cfg, double alpha) {
  const std::vector<Vector> draws = design_draws(cfg.d, cfg.seed, kAdmissibilityDraws);
  SgdConfig sc{cfg.d, cfg.p, alpha, equispaced_beta(cfg.d), cfg.burn_in};
  return lr_admissible_q2(sc, draws);
}

inline CoverageResult run_coverage(const ExperimentConfig& cfg, double alpha) {
  cfg.validate();
  const auto checkpoints = coverage_checkpoints(cfg);
  if (checkpoints.empty()) throw ParameterError("coverage: no checkpoints after scaling");
  if (checkpoints.front() <= cfg.burn_in) throw ParameterError("coverage: checkpoints must exceed burn_in");

  CoverageResult res{alpha, check_admissibility(cfg, alpha), {}};
  if (!res.admissibility.admissible) res.rows.push_back({0, "warning_inadmissible_alpha", res.admissibility.threshold, 0.0});

  std::vector<ReplicationHits> reps(cfg.runs);
  for_each_replication(cfg.runs, worker_count(cfg, cfg.runs),
                       [&](std::size_t r) { reps[r] = coverage_replication(cfg, alpha, checkpoints, r); });

  const double runs = static_cast<double>(cfg.runs);
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    double coord = 0.0;
    std::vector<bool> proj, joint;
    for (const auto& h : reps) {
      coord += h.coordinate[c];
      proj.push_back(h.projection[c]);
      joint.push_back(h.joint[c]);
    }
    const auto tc = coverage_from_rate(coord / runs, cfg.runs);
    const auto tp = coverage_tally(proj);
    const auto tj = coverage_tally(joint);
    res.rows.push_back({checkpoints[c], mode_name(CoverageMode::Coordinate), tc.rate, tc.se});
    res.rows.push_back({checkpoints[c], mode_name(CoverageMode::Projection), tp.rate, tp.se});
    res.rows.push_back({checkpoints[c], mode_name(CoverageMode::Joint), tj.rate, tj.se});
  }
  return res;
}

inline CsvTable coverage_table(const CoverageResult& res) {
  CsvTable t{{"checkpoint_n", "mode", "coverage", "se"}, {}};
  for (const auto& r : res.rows)
    t.rows.push_back({fmt_count(r.checkpoint_n), r.mode, fmt_real(r.coverage), fmt_real(r.se)});
  return t;
}

// ---------------------------------------------------------------------------
// traces: averaged AGD and ASGD iterates from one run

struct TraceRow {
  std::size_t k;
  std::string algo;
  std::size_t coord;
  double value;
};

// Recording grid: every step up to 100, then about 1000 evenly spaced steps.
inline bool trace_record(std::size_t k, std::size_t n) {
  const std::size_t stride = std::max<std::size_t>(1, n / 1000);
  return k <= 100 || k % stride == 0 || k == n;
}

inline std::vector<TraceRow> run_traces(const ExperimentConfig& cfg, const Vector* beta_star_override = nullptr) {
  cfg.validate();
  const std::size_t d = cfg.d, n = cfg.steps();
  const double alpha = cfg.alpha.front();
  const Vector beta_star = beta_star_override ? *beta_star_override : equispaced_beta(d);
  if (beta_star.dim() != d) throw DimensionError("traces: beta_star has wrong dimension");
  std::vector<TraceRow> rows;

  {
    RngStream rng(cfg.seed, 0);
    FixedDesignData data = gen_fixed_design(std::max(cfg.design_rows, d), d, beta_star, rng);
    const GdProblem problem(std::move(data.X), std::move(data.y), cfg.p, alpha);
    if (!problem.admissible())
      throw ParameterError("traces: alpha=" + fmt_real(alpha) + " diverges for gradient descent on this design (bound " +
                           fmt_real(lr_bound_gd(problem.gram())) + ")");
    GdState state{Vector(d), 0};
    RunningMean avg(d);
    DropoutMask mask;
    for (std::size_t k = 1; k <= n; ++k) {
      sample_dropout_into(mask, d, cfg.p, rng);
      state = gd_step(problem, std::move(state), mask);
      avg.push(state.beta);
      if (trace_record(k, n))
        for (std::size_t j = 0; j < d; ++j) rows.push_back({k, "agd", j + 1, avg.mean()[j]});
    }
  }
  {
    RngStream rng(cfg.seed, 1);
    SgdState state = SgdState::zero(d);
    RunningMean avg(d);
    StreamSample sample;
    DropoutMask mask;
    for (std::size_t k = 1; k <= n; ++k) {
      stream_sample_into(sample, beta_star, rng);
      sample_dropout_into(mask, d, cfg.p, rng);
      sgd_step_inplace(alpha, state, sample, mask);
      avg.push(state.beta);
      if (trace_record(k, n))
        for (std::size_t j = 0; j < d; ++j) rows.push_back({k, "asgd", j + 1, avg.mean()[j]});
    }
  }
  return rows;
}

inline CsvTable traces_table(const std::vector<TraceRow>& rows) {
  CsvTable t{{"k", "algo", "coord", "value"}, {}};
  for (const auto& r : rows) t.rows.push_back({fmt_count(r.k), r.algo, fmt_count(r.coord), fmt_real(r.value)});
  return t;
}

// ---------------------------------------------------------------------------
// cov-convergence: Σ̂_n diagonals and projection-CI length along one ASGD run,
// or (oracle mode) the median operator-norm error on i.i.d. N(0, Σ) input.

struct SeriesRow {
  std::size_t checkpoint_n;
  std::string series;
  double value;
};

// Σ_ij = 0.5^|i-j|
inline Matrix oracle_covariance(std::size_t d) {
  Matrix s(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) s(i, j) = std::pow(0.5, std::abs(static_cast<double>(i) - static_cast<double>(j)));
  return s;
}

// Operator-norm errors ‖Σ̂_n - Σ‖ at each checkpoint, one row per replication.
inline std::vector<std::vector<double>> oracle_errors(const ExperimentConfig& cfg,
                                                      const std::vector<std::size_t>& checkpoints) {
  const std::size_t d = cfg.d;
  const Matrix sigma = oracle_covariance(d);
  const Matrix chol = cholesky_lower(sigma);
  std::vector<std::vector<double>> errs(cfg.runs);
  for_each_replication(cfg.runs, worker_count(cfg, cfg.runs), [&](std::size_t r) {
    RngStream rng(cfg.seed, r);
    CovState cov(d, BlockSchedule(cfg.c, cfg.zeta));
    Vector z(d), x(d);
    std::size_t next = 0;
    for (std::size_t k = 1; k <= checkpoints.back(); ++k) {
      for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j <= i; ++j) s += chol(i, j) * z[j];
        x[i] = s;
      }
      cov.update(x);
      if (k == checkpoints[next]) {
        errs[r].push_back(operator_norm(cov.finalize() - sigma));
        ++next;
      }
    }
  });
  return errs;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median: empty input");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline std::vector<SeriesRow> run_cov_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto checkpoints = trace_checkpoints(cfg);
  if (checkpoints.empty()) throw ParameterError("cov-convergence: no checkpoints after scaling");
  std::vector<SeriesRow> rows;
  const std::size_t d = cfg.d;

  if (cfg.oracle) {
    const auto errs = oracle_errors(cfg, checkpoints);
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      std::vector<double> col;
      for (const auto& e : errs) col.push_back(e[c]);
      rows.push_back({checkpoints[c], "oracle_error", median(std::move(col))});
    }
    return rows;
  }

  const double alpha = cfg.alpha.front();
  const Vector beta_star = equispaced_beta(d);
  const Vector v(std::vector<double>(d, 1.0 / std::sqrt(static_cast<double>(d))));
  RngStream rng(cfg.seed, 0);
  SgdState state = SgdState::zero(d);
  CovState cov(d, BlockSchedule(cfg.c, cfg.zeta));
  StreamSample sample;
  DropoutMask mask;
  std::size_t next = 0;
  for (std::size_t k = 1; k <= checkpoints.back(); ++k) {
    stream_sample_into(sample, beta_star, rng);
    sample_dropout_into(mask, d, cfg.p, rng);
    sgd_step_inplace(alpha, state, sample, mask);
    cov.update(state.beta);
    if (k != checkpoints[next]) continue;
    ++next;
    const Matrix sigma = cov.finalize();
    for (std::size_t j = 0; j < d; ++j) rows.push_back({k, "sigma_" + std::to_string(j + 1), sigma(j, j)});
    rows.push_back({k, "ci_length", ci_projection(cov.mean(), sigma, cov.n(), cfg.omega, v).length()});
  }
  return rows;
}

inline CsvTable series_table(const std::vector<SeriesRow>& rows) {
  CsvTable t{{"checkpoint_n", "series", "value"}, {}};
  for (const auto& r : rows) t.rows.push_back({fmt_count(r.checkpoint_n), r.series, fmt_real(r.value)});
  return t;
}

}  // namespace dsgd
