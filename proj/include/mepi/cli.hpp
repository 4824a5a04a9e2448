#pragma once

// Batch command-line front end. One verb per invocation:
//   generate        --sources spec.json [--mix matrix.json] --n N [--seed S] [--out path]
//   analyze-matrix  --input matrix.json [--field real|complex] [--out path]
//   verify-epi      --config exp.json [--out report.json]
//   entropy         --input samples.csv --method spacing|knn [--k K] [--m-spacing M] [--seed S] [--out path]
//   extract         --input samples.csv --m M [--field real|complex] [--truth-mix matrix.json]
//                   [--restarts R] [--seed S] [--threshold T] [--out result.json]
//
// Exit codes: 0 success; 1 EPI violation flagged; 2 usage error; 3 I/O error;
// 10 + ErrorCode for library errors (see errors.hpp order).

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mepi/bse.hpp"
#include "mepi/distributions.hpp"
#include "mepi/entropy_estimation.hpp"
#include "mepi/epi_lab.hpp"
#include "mepi/errors.hpp"
#include "mepi/io.hpp"
#include "mepi/matrix_analysis.hpp"

namespace mepi::cli {

enum class Verb { Generate, AnalyzeMatrix, VerifyEpi, Entropy, Extract };

struct Command {
  Verb verb = Verb::AnalyzeMatrix;
  std::string input;
  std::string sources;
  std::string mix;
  std::string config;
  std::string truth_mix;
  std::string out;  ///< empty: standard output
  std::optional<Field> field;
  std::size_t n = 0;
  Index m = 0;
  std::size_t k = 4;
  std::optional<std::size_t> m_spacing;
  EstimatorMethod method = EstimatorMethod::Spacing;
  std::size_t restarts = 5;
  std::uint64_t seed = kDefaultSeed;
  double threshold = 0.95;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int exit_code(ErrorCode c) { return 10 + static_cast<int>(c); }

namespace detail {

inline void build_app(CLI::App& app, Command& cmd, std::string& field_str, std::string& method_str) {
  app.require_subcommand(1, 1);
  app.footer("Default seed: 0xC0FFEE (12648430). Exit codes: 0 ok, 1 EPI violation, 2 usage, 3 I/O, "
             ">=10 library error.");

  auto* gen = app.add_subcommand("generate", "Sample sources (optionally mixed) to CSV");
  gen->add_option("--sources", cmd.sources, "Source models JSON")->required();
  gen->add_option("--mix", cmd.mix, "Mixing matrix JSON; writes Y = M X");
  gen->add_option("--n", cmd.n, "Number of observations")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", cmd.seed, "RNG seed");
  gen->add_option("--out", cmd.out, "Output CSV path");

  auto* ana = app.add_subcommand("analyze-matrix", "Presence, recoverability and canonical form");
  ana->add_option("--input", cmd.input, "Matrix JSON")->required();
  ana->add_option("--field", field_str, "Treat the matrix as real or complex")
      ->check(CLI::IsMember({"real", "complex"}));
  ana->add_option("--out", cmd.out, "Output JSON path");

  auto* epi = app.add_subcommand("verify-epi", "Run an EPI experiment; exit 1 on a violation flag");
  epi->add_option("--config", cmd.config, "Experiment config JSON")->required();
  epi->add_option("--out", cmd.out, "Report JSON path");

  auto* ent = app.add_subcommand("entropy", "Estimate differential entropy of samples (nats)");
  ent->add_option("--input", cmd.input, "Samples CSV")->required();
  ent->add_option("--method", method_str, "spacing or knn")->required()->check(CLI::IsMember({"spacing", "knn"}));
  ent->add_option("--k", cmd.k, "knn neighbour count")->check(CLI::PositiveNumber);
  ent->add_option("--m-spacing", cmd.m_spacing, "spacing window")->check(CLI::PositiveNumber);
  ent->add_option("--seed", cmd.seed, "seed for duplicate jitter");
  ent->add_option("--out", cmd.out, "Output JSON path");

  auto* ext = app.add_subcommand("extract", "Blind extraction of m sources by contrast minimization");
  ext->add_option("--input", cmd.input, "Observations CSV")->required();
  ext->add_option("--m", cmd.m, "Number of sources to extract (>= 1)")->required()->check(CLI::PositiveNumber);
  ext->add_option("--field", field_str, "real or complex")->check(CLI::IsMember({"real", "complex"}));
  ext->add_option("--truth-mix", cmd.truth_mix, "True mixing matrix JSON for separation quality");
  ext->add_option("--restarts", cmd.restarts, "Random restarts")->check(CLI::PositiveNumber);
  ext->add_option("--seed", cmd.seed, "RNG seed");
  ext->add_option("--threshold", cmd.threshold, "Dominance threshold")->check(CLI::Range(0.0, 1.0));
  ext->add_option("--out", cmd.out, "Output JSON path");
}

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace detail

inline std::string usage() {
  CLI::App app("mepi: matrix entropy-power inequality toolkit", "mepi");
  Command cmd;
  std::string f, m;
  detail::build_app(app, cmd, f, m);
  return app.help();
}

/// Parses argv (without the program name). Throws UsageError naming the offending flag.
inline Command parse_args(const std::vector<std::string>& argv) {
  CLI::App app("mepi: matrix entropy-power inequality toolkit", "mepi");
  Command cmd;
  std::string field_str, method_str;
  detail::build_app(app, cmd, field_str, method_str);
  std::vector<std::string> reversed(argv.rbegin(), argv.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw UsageError(detail::one_line(e.what()));
  }
  const std::string verb = app.get_subcommands().front()->get_name();
  if (verb == "generate") cmd.verb = Verb::Generate;
  if (verb == "analyze-matrix") cmd.verb = Verb::AnalyzeMatrix;
  if (verb == "verify-epi") cmd.verb = Verb::VerifyEpi;
  if (verb == "entropy") cmd.verb = Verb::Entropy;
  if (verb == "extract") cmd.verb = Verb::Extract;
  if (!field_str.empty()) cmd.field = parse_field(field_str);
  if (!method_str.empty()) cmd.method = parse_method(method_str);
  return cmd;
}

namespace detail {

inline void emit(const Command& cmd, const std::string& text, std::ostream& out) {
  if (cmd.out.empty())
    out << text;
  else
    io::write_file(cmd.out, text);
}

inline void require_file(const std::string& path, const char* flag) {
  if (!std::filesystem::is_regular_file(path))
    throw io::IoError(std::string(flag) + ": no such file '" + path + "'");
}

inline int run_generate(const Command& cmd, std::ostream& out) {
  require_file(cmd.sources, "--sources");
  const auto sources = io::sources_from_json(io::load_json(cmd.sources));
  const Field field = sources.front().field();
  std::optional<MixingMatrix> mix;
  if (!cmd.mix.empty()) {
    require_file(cmd.mix, "--mix");
    mix = io::matrix_from_json(io::load_json(cmd.mix));
    if (mix->cols() != static_cast<Index>(sources.size()))
      throw Error(ErrorCode::InvalidArgument, "mixing matrix columns must equal the number of sources");
  }
  std::string csv;
  if (field == Field::Real) {
    RealMatrix x = sample_sources<double>(sources, cmd.n, cmd.seed);
    if (mix) x = mix->real() * x;
    csv = io::samples_to_csv(x);
  } else {
    ComplexMatrix x = sample_sources<cdouble>(sources, cmd.n, cmd.seed);
    if (mix) x = mix->complex() * x;
    csv = io::samples_to_csv(x);
  }
  emit(cmd, csv, out);
  return kExitOk;
}

template <class Scalar>
io::json analyze_typed(const Mat<Scalar>& a) {
  io::json j;
  j["rows"] = a.rows();
  j["cols"] = a.cols();
  j["field"] = to_string(field_of<Scalar>());
  j["rank"] = rank_of(a);
  const auto cls = classify_components(a);
  const auto wide = mepi::detail::widen(cls);
  const io::json c = io::classification_to_json(wide, field_of<Scalar>());
  j["present"] = c["present"];
  j["recoverable"] = c["recoverable"];
  j["witnesses"] = c["witnesses"];

  // Canonical form of the matrix restricted to its present columns.
  Mat<Scalar> reduced(a.rows(), static_cast<Index>(cls.present.size()));
  for (Index k = 0; k < reduced.cols(); ++k) reduced.col(k) = a.col(cls.present[static_cast<std::size_t>(k)]);
  const auto canon = canonical_form(reduced);
  io::json perm = io::json::array();
  for (Index k : canon.permutation) perm.push_back(cls.present[static_cast<std::size_t>(k)] + 1);
  j["canonical"] = io::json{{"r", canon.r}, {"B", io::matrix_to_json(canon.B)}, {"permutation", perm},
                            {"A_u", canon.A_u.size() ? io::matrix_to_json(canon.A_u) : io::json(nullptr)}};
  return j;
}

inline int run_analyze(const Command& cmd, std::ostream& out) {
  require_file(cmd.input, "--input");
  const MixingMatrix a = io::matrix_from_json(io::load_json(cmd.input));
  const bool as_complex = cmd.field ? *cmd.field == Field::Complex : !a.is_real();
  if (!as_complex && !a.is_real())
    throw Error(ErrorCode::InvalidArgument, "complex matrix cannot be analyzed as real");
  const io::json j = as_complex ? analyze_typed(a.complex()) : analyze_typed(a.real());
  emit(cmd, j.dump(2) + "\n", out);
  return kExitOk;
}

inline int run_verify(const Command& cmd, std::ostream& out) {
  require_file(cmd.config, "--config");
  const auto cfg = io::config_from_json(io::load_json(cmd.config), std::filesystem::path(cmd.config).parent_path());
  const EpiReport rep = run_epi_trial(cfg);
  emit(cmd, io::report_to_json(rep).dump(2) + "\n", out);
  return rep.verdict == Verdict::ViolationFlag ? kExitViolation : kExitOk;
}

inline int run_entropy(const Command& cmd, std::ostream& out) {
  require_file(cmd.input, "--input");
  const auto table = io::samples_from_csv(io::read_file(cmd.input));
  EntropyEstimate est;
  if (cmd.method == EstimatorMethod::Spacing) {
    if (table.field != Field::Real || table.real.rows() != 1)
      throw Error(ErrorCode::InvalidArgument, "spacing estimator needs exactly one real column");
    const RealVector row = table.real.row(0).transpose();
    est = spacing_entropy(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), cmd.m_spacing);
  } else {
    if (table.field == Field::Real) {
      KnnOptions opts;
      opts.k = cmd.k;
      opts.seed = cmd.seed;
      est = knn_entropy(table.real, opts);
    } else {
      EstimatorSettings s;
      s.k = cmd.k;
      est = estimate_entropy<cdouble>(table.complex, s, cmd.seed);
    }
  }
  emit(cmd, io::estimate_to_json(est).dump(2) + "\n", out);
  return kExitOk;
}

template <class Scalar>
int extract_typed(const Command& cmd, const Mat<Scalar>& y, std::ostream& out) {
  ExtractionConfig cfg;
  cfg.restarts = cmd.restarts;
  cfg.seed = cmd.seed;
  if (cmd.m > y.rows()) throw UsageError("--m: must not exceed the number of channels (" + std::to_string(y.rows()) + ")");
  const auto res = minimize_contrast<Scalar>(y, cmd.m, cfg);
  io::json j = io::extraction_to_json(res);
  if (!cmd.truth_mix.empty()) {
    require_file(cmd.truth_mix, "--truth-mix");
    const MixingMatrix mm = io::matrix_from_json(io::load_json(cmd.truth_mix));
    Mat<Scalar> m;
    if constexpr (std::is_same_v<Scalar, double>)
      m = mm.real();
    else
      m = mm.complex();
    j["separation_quality"] = io::quality_to_json(separation_quality<Scalar>(res.W, m, cmd.threshold), cmd.threshold);
  }
  emit(cmd, j.dump(2) + "\n", out);
  return kExitOk;
}

inline int run_extract(const Command& cmd, std::ostream& out) {
  require_file(cmd.input, "--input");
  const auto table = io::samples_from_csv(io::read_file(cmd.input));
  const Field field = cmd.field.value_or(table.field);
  if (field == Field::Complex) {
    if (table.field == Field::Real) return extract_typed<cdouble>(cmd, table.real.cast<cdouble>(), out);
    return extract_typed<cdouble>(cmd, table.complex, out);
  }
  if (table.field != Field::Real) throw Error(ErrorCode::InvalidArgument, "complex samples given with --field real");
  return extract_typed<double>(cmd, table.real, out);
}

}  // namespace detail

/// Runs a parsed command. Diagnostics go to err as one line "error: <Kind>: <message>".
inline int execute(const Command& cmd, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    switch (cmd.verb) {
      case Verb::Generate: return detail::run_generate(cmd, out);
      case Verb::AnalyzeMatrix: return detail::run_analyze(cmd, out);
      case Verb::VerifyEpi: return detail::run_verify(cmd, out);
      case Verb::Entropy: return detail::run_entropy(cmd, out);
      case Verb::Extract: return detail::run_extract(cmd, out);
    }
  } catch (const UsageError& e) {
    err << "error: UsageError: " << detail::one_line(e.what()) << '\n';
    return kExitUsage;
  } catch (const io::IoError& e) {
    err << "error: IoError: " << detail::one_line(e.what()) << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << detail::one_line(e.what()) << '\n';
    return exit_code(e.code());
  }
  return kExitUsage;
}

/// Full entry point: parse then execute.
inline int run(const std::vector<std::string>& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (argv.empty()) {
    err << usage();
    return kExitUsage;
  }
  if (std::any_of(argv.begin(), argv.end(), [](const std::string& a) { return a == "--help" || a == "-h"; })) {
    out << usage();
    return kExitOk;
  }
  Command cmd;
  try {
    cmd = parse_args(argv);
  } catch (const UsageError& e) {
    err << "error: UsageError: " << e.what() << '\n';
    return kExitUsage;
  }
  return execute(cmd, out, err);
}

}  // namespace mepi::cli
