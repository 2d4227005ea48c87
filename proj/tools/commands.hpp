#pragma once

// Verbs of the korolat command-line tool. Each verb reads an ExperimentConfig
// and writes to the given streams; run_verb maps failures to exit codes.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "korolat/korolat.hpp"

namespace korolat::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kInvalidConfig = 2, kRetryExhausted = 3, kSolverFailure = 4 };

struct ExperimentConfig {
  int d = 2;
  double alpha = 1.0;
  std::vector<double> gamma;  // empty: unit weights
  std::vector<std::int64_t> N{1619};
  std::vector<std::int64_t> g;  // empty: constructed by CBC or drawn at random
  std::string g_source = "cbc";
  std::string m_rule = "infimum_card";
  double delta = 0.5;
  std::int64_t card_A = 0;  // > 0: M is the largest threshold with |A_M| <= card_A
  double M = 0.0;           // > 0: explicit threshold
  double K = kDefaultK;
  std::int64_t S = 0;
  std::uint64_t seed = 0;
  std::string function = "exp_cos_sin";
  std::size_t n_samples = kDefaultLinfSamples;
  std::size_t n_shifts = 10;
  std::string mode = "det";
  bool fast = true;
  std::size_t trials = 100;
  int table = 1;
  std::string scale = "desk";
  unsigned threads = 1;
  std::string model_out;
  std::string model_in;
  std::vector<std::vector<double>> points;

  KorobovParams params() const {
    return KorobovParams(d, alpha, gamma.empty() ? std::vector<double>(static_cast<std::size_t>(d), 1.0) : gamma);
  }

  MRule rule() const {
    if (m_rule == "infimum_card") return MRule::infimum_card();
    if (m_rule == "closed_form_half") return MRule::closed_form_half();
    if (m_rule == "closed_form_delta") return MRule::closed_form_delta(delta);
    throw DomainError("config: unknown m_rule '" + m_rule + "'");
  }

  /// Threshold for lattice size n: explicit M, else the |A| target, else the rule.
  double threshold(std::int64_t n) const {
    const auto p = params();
    if (M > 0.0) return M;
    if (card_A > 0) return infimum_card_M(p, static_cast<std::size_t>(card_A));
    return choose_M(p, n, rule());
  }

  void validate() const {
    params();
    rule();
    if (N.empty()) throw DomainError("config: N must not be empty");
    for (auto n : N)
      if (n < 2 || !is_prime(static_cast<std::uint64_t>(n))) throw DomainError("config: every N must be prime");
    if (!g.empty() && g.size() != static_cast<std::size_t>(d)) throw DomainError("config: g must have d entries");
    if (g_source != "cbc" && g_source != "random") throw DomainError("config: g_source must be cbc or random");
    if (mode != "det" && mode != "rand") throw DomainError("config: mode must be det or rand");
    if (scale != "desk" && scale != "full") throw DomainError("config: scale must be desk or full");
    parse_test_function(function);
    if (!(K > 1.0)) throw DomainError("config: K must exceed 1");
    if (S < 0 || card_A < 0 || M < 0.0) throw DomainError("config: S, card_A and M must be non-negative");
    if (n_samples < 1 || n_shifts < 1 || trials < 1) throw DomainError("config: sample counts must be positive");
    if (table < 1 || table > 6) throw DomainError("config: table must be in 1..6");
    if (threads < 1) throw DomainError("config: threads must be positive");
    for (const auto& x : points)
      if (x.size() != static_cast<std::size_t>(d)) throw DomainError("config: every point needs d coordinates");
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"d", c.d},
       {"alpha", c.alpha},
       {"gamma", c.gamma},
       {"N", c.N},
       {"g", c.g},
       {"g_source", c.g_source},
       {"m_rule", c.m_rule},
       {"delta", c.delta},
       {"card_A", c.card_A},
       {"M", c.M},
       {"K", c.K},
       {"S", c.S},
       {"seed", c.seed},
       {"function", c.function},
       {"n_samples", c.n_samples},
       {"n_shifts", c.n_shifts},
       {"mode", c.mode},
       {"fast", c.fast},
       {"trials", c.trials},
       {"table", c.table},
       {"scale", c.scale},
       {"threads", c.threads},
       {"model_out", c.model_out},
       {"model_in", c.model_in},
       {"points", c.points}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw DomainError("config: expected a JSON object");
  static const std::set<std::string> known{"d",         "alpha",     "gamma", "N",     "g",        "g_source",
                                           "m_rule",    "delta",     "card_A", "M",    "K",        "S",
                                           "seed",      "function",  "n_samples", "n_shifts", "mode", "fast",
                                           "trials",    "table",     "scale", "threads", "model_out", "model_in",
                                           "points"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw DomainError("config: unknown key '" + key + "'");
  ExperimentConfig out;
  // d follows the function unless given
  if (j.contains("function")) out.function = j["function"].get<std::string>();
  out.d = parse_test_function(out.function) == TestFunction::Kind::ExpCosSinBernoulli ? 3 : 2;
  if (j.contains("d")) out.d = j["d"].get<int>();
  if (j.contains("alpha")) out.alpha = j["alpha"].get<double>();
  if (j.contains("gamma")) out.gamma = j["gamma"].get<std::vector<double>>();
  if (j.contains("N")) {
    if (j["N"].is_array()) {
      out.N = j["N"].get<std::vector<std::int64_t>>();
    } else {
      out.N = {j["N"].get<std::int64_t>()};
    }
  }
  if (j.contains("g")) out.g = j["g"].get<std::vector<std::int64_t>>();
  out.g_source = j.value("g_source", out.g_source);
  out.m_rule = j.value("m_rule", out.m_rule);
  out.delta = j.value("delta", out.delta);
  out.card_A = j.value("card_A", out.card_A);
  out.M = j.value("M", out.M);
  out.K = j.value("K", out.K);
  out.S = j.value("S", out.S);
  out.seed = j.value("seed", out.seed);
  out.n_samples = j.value("n_samples", out.n_samples);
  out.n_shifts = j.value("n_shifts", out.n_shifts);
  out.mode = j.value("mode", out.mode);
  out.fast = j.value("fast", out.fast);
  out.trials = j.value("trials", out.trials);
  out.table = j.value("table", out.table);
  out.scale = j.value("scale", out.scale);
  out.threads = j.value("threads", out.threads);
  out.model_out = j.value("model_out", out.model_out);
  out.model_in = j.value("model_in", out.model_in);
  if (j.contains("points")) out.points = j["points"].get<std::vector<std::vector<double>>>();
  c = std::move(out);
}

inline ExperimentConfig load_config(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("config: ") + e.what());
  }
  return j.get<ExperimentConfig>();
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("config: cannot open '" + path + "'");
  return load_config(in);
}

inline RunOptions run_options(const ExperimentConfig& c) {
  RunOptions opt;
  opt.K = c.K;
  opt.S = c.S;
  opt.seed = c.seed;
  opt.n_samples = c.n_samples;
  opt.n_shifts = c.n_shifts;
  opt.threads = c.threads;
  return opt;
}

/// Output sink: the --out file when given, else the fallback stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw DomainError("cannot open output '" + path + "'");
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }
  bool to_file() const { return file_.is_open(); }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

// ---------------------------------------------------------------- verbs

/// One line per N: "N g1 ... gd P rho" with rho = 1 when rho(g) > M.
inline void cmd_cbc(const ExperimentConfig& c, const std::string& out_path, std::ostream& out) {
  const auto p = c.params();
  ExperimentConfig last = c;
  out << std::setprecision(17);
  for (auto n : c.N) {
    const auto gen = cbc_construct(n, p, c.fast);
    const double M = c.threshold(n);
    out << n;
    for (auto v : gen.g()) out << ' ' << v;
    out << ' ' << worst_case_P(gen, p) << ' ' << (rho_exceeds(gen, p, M) ? 1 : 0) << '\n';
    last.N = {n};
    last.g = gen.g();
  }
  // the written config reproduces the last lattice with an explicit g
  if (!out_path.empty()) {
    Sink sink(out_path, out);
    *sink << nlohmann::json(last).dump(2) << '\n';
  }
}

/// One line per N: "N g1 ... gd" with rho(g) > M, g = (1, g2, ...).
inline void cmd_sample_g(const ExperimentConfig& c, const std::string& out_path, std::ostream& out) {
  const auto p = c.params();
  Sink sink(out_path, out);
  Rng root(c.seed);
  for (std::size_t i = 0; i < c.N.size(); ++i) {
    Rng rng = root.split(i + 1);
    const auto gen = sample_random_g(c.N[i], p, rng, c.threshold(c.N[i]), kDefaultGRetries, true);
    *sink << c.N[i];
    for (auto v : gen.g()) *sink << ' ' << v;
    *sink << '\n';
  }
}

struct FiberSummary {
  std::vector<std::size_t> R;  // per trial
  std::map<std::size_t, std::size_t> histogram;
  std::size_t median = 0;      // lower median
  std::size_t min = 0;
  std::size_t max = 0;
};

/// Maximal fiber lengths for random g = (1, g2, ...); trial t draws from Rng(seed).split(t + 1).
inline FiberSummary fiber_statistics(const ExperimentConfig& c) {
  const auto p = c.params();
  const std::int64_t n = c.N.front();
  const IndexSet set = enumerate_index_set(p, c.threshold(n));
  FiberSummary s;
  s.R.resize(c.trials);
  const Rng root(c.seed);
  parallel_for(c.trials, c.threads, [&](std::size_t t) {
    Rng rng = root.split(t + 1);
    std::vector<std::uint32_t> scratch;
    const auto gen = c.g.empty() ? sample_random_g(n, p.d(), rng, true) : GeneratingVector(n, c.g);
    s.R[t] = max_fiber_length(set, gen, scratch);
  });
  for (auto r : s.R) ++s.histogram[r];
  std::vector<std::size_t> sorted = s.R;
  std::sort(sorted.begin(), sorted.end());
  s.median = sorted[(sorted.size() - 1) / 2];
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

/// Histogram CSV to --out (or out); summary line to log.
inline void cmd_fibers(const ExperimentConfig& c, const std::string& out_path, std::ostream& out, std::ostream& log) {
  const auto s = fiber_statistics(c);
  Sink sink(out_path, out);
  write_histogram_csv(*sink, s.histogram);
  (sink.to_file() ? out : log) << "trials " << c.trials << " median " << s.median << " min " << s.min << " max "
                               << s.max << '\n';
}

inline GeneratingVector config_generator(const ExperimentConfig& c, std::int64_t n, double M) {
  if (!c.g.empty()) return GeneratingVector(n, c.g);
  const auto p = c.params();
  if (c.g_source == "cbc") return cbc_construct(n, p);
  Rng rng = Rng(c.seed).split(0);
  return sample_random_g(n, p, rng, M, kDefaultGRetries, true);
}

/// Full pipeline for the first N; JSON report to --out (or out), model to model_out.
inline nlohmann::json cmd_approx(const ExperimentConfig& c, const std::string& out_path, std::ostream& out) {
  const TestFunction tf{parse_test_function(c.function)};
  if (tf.dimension() != c.d) throw DomainError("config: d does not match the test function");
  const std::int64_t n = c.N.front();
  const double M = c.threshold(n);
  const auto gen = config_generator(c, n, M);
  const auto run = run_pipeline(tf, c.params(), M, gen, c.mode == "det" ? Mode::Det : Mode::Rand, run_options(c));
  if (!c.model_out.empty()) {
    std::ofstream mf(c.model_out, std::ios::binary);
    if (!mf) throw DomainError("cannot open model output '" + c.model_out + "'");
    write_model(mf, run.model);
  }
  nlohmann::json report = to_json(run.row);
  report["function"] = c.function;
  report["evaluations"] = run.model.meta().evaluations;
  report["certified"] = run.shifts->certified();
  if (c.mode == "rand") {
    report["mean_error"] = run.rand.mean_Linf;
    report["rms_L2"] = run.rand.rms_L2;
  }
  Sink sink(out_path, out);
  *sink << report.dump(2) << '\n';
  return report;
}

/// Reference ladder of one table: CSV to --out (or out). Row i uses seed Rng(seed).split(i + 1).
inline std::vector<ExperimentRow> cmd_table(const ExperimentConfig& c, const std::string& out_path, std::ostream& out) {
  const auto table = reference_table(c.table);
  const auto refs = ladder(table, c.scale == "full");
  std::vector<ExperimentRow> rows(refs.size());
  // rows run in parallel; each row evaluates serially
  ExperimentConfig serial = c;
  serial.threads = 1;
  parallel_for(refs.size(), c.threads, [&](std::size_t i) {
    RunOptions opt = run_options(serial);
    opt.seed = Rng(c.seed).split(i + 1).seed();
    rows[i] = run_reference_row(table, refs[i], opt).row;
  });
  Sink sink(out_path, out);
  write_rows_csv(*sink, rows);
  return rows;
}

/// Evaluates a stored model at the configured points ("x1 ... xd re im"), or,
/// without points, reports its sampled errors against the configured function.
inline void cmd_eval(const ExperimentConfig& c, const std::string& out_path, std::ostream& out) {
  if (c.model_in.empty()) throw DomainError("config: eval needs model_in");
  std::ifstream in(c.model_in);
  if (!in) throw DomainError("cannot open model '" + c.model_in + "'");
  const auto model = read_model(in);
  Sink sink(out_path, out);
  *sink << std::setprecision(17);
  if (!c.points.empty()) {
    for (const auto& x : c.points) {
      if (x.size() != static_cast<std::size_t>(model.d())) throw DomainError("eval: point dimension mismatch");
      const auto v = evaluate_model(model, x);
      for (double xi : x) *sink << xi << ' ';
      *sink << v.real() << ' ' << v.imag() << '\n';
    }
    return;
  }
  const TestFunction tf{parse_test_function(c.function)};
  if (tf.dimension() != model.d()) throw DomainError("eval: model dimension does not match the function");
  const auto f = make_black_box(tf);
  const Rng root(c.seed);
  Rng linf_rng = root.split(2);
  Rng l2_rng = root.split(3);
  nlohmann::json j;
  j["Linf"] = estimate_Linf(f, model, c.n_samples, linf_rng, c.threads);
  j["L2"] = estimate_L2(f, model, kDefaultL2Samples, l2_rng, c.threads);
  j["size"] = model.size();
  *sink << j.dump(2) << '\n';
}

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v{"cbc", "sample-g", "fibers", "approx", "table", "eval"};
  return v;
}

/// Runs body and maps library errors to exit codes.
inline int guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
  } catch (const RetryExhaustedError& e) {
    err << "error: " << e.what() << '\n';
    return kRetryExhausted;
  } catch (const SolverError& e) {
    err << "error: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const ResourceError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "error: config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

inline int run_verb(const std::string& verb, const ExperimentConfig& c, const std::string& out_path, std::ostream& out,
                    std::ostream& err) {
  return guarded(
      [&] {
        c.validate();
        if (verb == "cbc") {
          cmd_cbc(c, out_path, out);
        } else if (verb == "sample-g") {
          cmd_sample_g(c, out_path, out);
        } else if (verb == "fibers") {
          cmd_fibers(c, out_path, out, err);
        } else if (verb == "approx") {
          cmd_approx(c, out_path, out);
        } else if (verb == "table") {
          cmd_table(c, out_path, out);
        } else if (verb == "eval") {
          cmd_eval(c, out_path, out);
        } else {
          throw DomainError("unknown verb '" + verb + "'");
        }
      },
      err);
}

}  // namespace korolat::cli
