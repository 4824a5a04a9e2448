#pragma once

// File formats:
//   matrix JSON   {"rows": m, "cols": n, "field": "real"|"complex", "data": [...]} row-major
//                 (flat or nested per row),
//                 complex entries as [re, im] pairs
//   source JSON   {"family": "...", "params": {...}, "field": "real"|"complex"}
//   samples CSV   header row "s1,...,sn" (real) or "s1_re,s1_im,..." (complex), one observation per row
// Component indices in JSON outputs are 1-based.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mepi/bse.hpp"
#include "mepi/distributions.hpp"
#include "mepi/entropy_estimation.hpp"
#include "mepi/epi_lab.hpp"
#include "mepi/errors.hpp"
#include "mepi/matrix_analysis.hpp"
#include "mepi/mixing_matrix.hpp"

namespace mepi::io {

using nlohmann::json;

/// Raised for unreadable/unwritable files; mapped to exit code 3 by the CLI.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, what + ": " + e.what());
  }
}

inline json load_json(const std::filesystem::path& path) { return parse_json(read_file(path), path.string()); }

// ---------------------------------------------------------------- matrices

template <class Scalar>
json matrix_to_json(const Mat<Scalar>& a) {
  json data = json::array();
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) {
      if constexpr (std::is_same_v<Scalar, double>)
        data.push_back(a(i, j));
      else
        data.push_back(json::array({a(i, j).real(), a(i, j).imag()}));
    }
  return json{{"rows", a.rows()}, {"cols", a.cols()}, {"field", to_string(field_of<Scalar>())}, {"data", data}};
}

inline json matrix_to_json(const MixingMatrix& a) {
  return a.is_real() ? matrix_to_json(a.real()) : matrix_to_json(a.complex());
}

inline MixingMatrix matrix_from_json(const json& j) {
  try {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const Field field = parse_field(j.value("field", std::string("real")));
    json data = j.at("data");
    const bool nested = data.is_array() && static_cast<Index>(data.size()) == rows && !data.empty() &&
                        data.front().is_array() &&
                        static_cast<Index>(data.front().size()) == cols && rows * cols != rows;
    if (nested) {
      json flat = json::array();
      for (const auto& row : data) {
        if (!row.is_array() || static_cast<Index>(row.size()) != cols)
          throw Error(ErrorCode::ParseError, "nested data rows must hold cols entries");
        for (const auto& e : row) flat.push_back(e);
      }
      data = std::move(flat);
    }
    if (rows < 1 || cols < 1) throw Error(ErrorCode::ParseError, "rows and cols must be positive");
    if (!data.is_array() || static_cast<Index>(data.size()) != rows * cols)
      throw Error(ErrorCode::ParseError, "data must hold rows*cols entries");
    if (field == Field::Real) {
      RealMatrix a(rows, cols);
      for (Index k = 0; k < rows * cols; ++k) a(k / cols, k % cols) = data[static_cast<std::size_t>(k)].get<double>();
      return MixingMatrix(a);
    }
    ComplexMatrix a(rows, cols);
    for (Index k = 0; k < rows * cols; ++k) {
      const auto& e = data[static_cast<std::size_t>(k)];
      if (e.is_number()) {
        a(k / cols, k % cols) = cdouble(e.get<double>(), 0.0);
      } else {
        if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::ParseError, "complex entries must be [re, im]");
        a(k / cols, k % cols) = cdouble(e[0].get<double>(), e[1].get<double>());
      }
    }
    return MixingMatrix(a);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("matrix JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------- sources

inline json source_to_json(const SourceModel& s) {
  json params = std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, dist::Gaussian>) return {{"mean", p.mean}, {"sigma", p.sigma}};
        if constexpr (std::is_same_v<T, dist::Uniform>) return {{"low", p.low}, {"high", p.high}};
        if constexpr (std::is_same_v<T, dist::Laplace>) return {{"mean", p.mean}, {"scale", p.scale}};
        if constexpr (std::is_same_v<T, dist::Exponential>) return {{"rate", p.rate}};
        if constexpr (std::is_same_v<T, dist::GaussianMixture2>)
          return {{"weight", p.weight}, {"mean1", p.mean1}, {"sigma1", p.sigma1}, {"mean2", p.mean2}, {"sigma2", p.sigma2}};
        if constexpr (std::is_same_v<T, dist::ComplexCircularGaussian>) return {{"sigma", p.sigma}};
        if constexpr (std::is_same_v<T, dist::ComplexUniformDisk>) return {{"radius", p.radius}};
      },
      s.params());
  return json{{"family", s.family()}, {"params", params}, {"field", to_string(s.field())}};
}

namespace detail {

/// Reads the named keys into doubles, rejecting unknown keys; absent keys keep their defaults.
inline void read_params(const json& params, std::initializer_list<std::pair<const char*, double*>> fields) {
  if (!params.is_object()) throw Error(ErrorCode::ParseError, "source params must be an object");
  for (const auto& [key, value] : params.items()) {
    bool known = false;
    for (const auto& [name, slot] : fields)
      if (key == name) {
        *slot = value.get<double>();
        known = true;
      }
    if (!known) throw Error(ErrorCode::ParseError, "unknown source parameter '" + key + "'");
  }
}

}  // namespace detail

inline SourceModel source_from_json(const json& j) {
  try {
    const auto family = j.at("family").get<std::string>();
    const json params = j.value("params", json::object());
    SourceModel out;
    if (family == "gaussian") {
      dist::Gaussian p;
      detail::read_params(params, {{"mean", &p.mean}, {"sigma", &p.sigma}});
      out = p;
    } else if (family == "uniform") {
      dist::Uniform p;
      detail::read_params(params, {{"low", &p.low}, {"high", &p.high}});
      out = p;
    } else if (family == "laplace") {
      dist::Laplace p;
      detail::read_params(params, {{"mean", &p.mean}, {"scale", &p.scale}});
      out = p;
    } else if (family == "exponential") {
      dist::Exponential p;
      detail::read_params(params, {{"rate", &p.rate}});
      out = p;
    } else if (family == "gaussian_mixture_2") {
      dist::GaussianMixture2 p;
      detail::read_params(params, {{"weight", &p.weight}, {"mean1", &p.mean1}, {"sigma1", &p.sigma1},
                                   {"mean2", &p.mean2}, {"sigma2", &p.sigma2}});
      out = p;
    } else if (family == "complex_circular_gaussian") {
      dist::ComplexCircularGaussian p;
      detail::read_params(params, {{"sigma", &p.sigma}});
      out = p;
    } else if (family == "complex_uniform_disk") {
      dist::ComplexUniformDisk p;
      detail::read_params(params, {{"radius", &p.radius}});
      out = p;
    } else {
      throw Error(ErrorCode::UnsupportedFamily, "unknown family '" + family + "'");
    }
    if (j.contains("field") && parse_field(j.at("field").get<std::string>()) != out.field())
      throw Error(ErrorCode::ParseError, "field does not match family '" + family + "'");
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("source JSON: ") + e.what());
  }
}

/// Accepts either a bare array of sources or {"sources": [...]}.
inline std::vector<SourceModel> sources_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("sources") ? j.at("sources") : j;
  if (!arr.is_array()) throw Error(ErrorCode::ParseError, "expected an array of sources");
  std::vector<SourceModel> out;
  for (const auto& s : arr) out.push_back(source_from_json(s));
  if (out.empty()) throw Error(ErrorCode::ParseError, "at least one source is required");
  return out;
}

// ---------------------------------------------------------------- estimates

inline json estimate_to_json(const EntropyEstimate& e) {
  return json{{"value", e.value},   {"method", to_string(e.method)}, {"param", e.param},
              {"N", e.n},           {"std_error", e.std_error}};
}

inline EntropyEstimate estimate_from_json(const json& j) {
  EntropyEstimate e;
  e.value = j.at("value").get<double>();
  e.method = parse_method(j.at("method").get<std::string>());
  e.param = j.at("param").get<std::size_t>();
  e.n = j.at("N").get<std::size_t>();
  e.std_error = j.at("std_error").get<double>();
  return e;
}

inline json estimator_settings_to_json(const EstimatorSettings& s) {
  json j = json::object();
  if (s.m_spacing) j["m_spacing"] = *s.m_spacing;
  j["k"] = s.k;
  if (s.tolerance) j["tolerance"] = *s.tolerance;
  return j;
}

inline EstimatorSettings estimator_settings_from_json(const json& j) {
  EstimatorSettings s;
  if (j.contains("m_spacing")) s.m_spacing = j.at("m_spacing").get<std::size_t>();
  if (j.contains("k")) s.k = j.at("k").get<std::size_t>();
  if (j.contains("tolerance")) s.tolerance = j.at("tolerance").get<double>();
  return s;
}

// ---------------------------------------------------------------- classification

inline json classification_to_json(const ComponentClassification<cdouble>& c, Field field) {
  auto one_based = [](const std::vector<Index>& v) {
    json a = json::array();
    for (Index j : v) a.push_back(j + 1);
    return a;
  };
  json witnesses = json::array();
  for (const auto& [j, b] : c.witnesses) {
    json vec = json::array();
    for (Index k = 0; k < b.size(); ++k) {
      if (field == Field::Real)
        vec.push_back(b(k).real());
      else
        vec.push_back(json::array({b(k).real(), b(k).imag()}));
    }
    witnesses.push_back(json{{"index", j + 1}, {"b", vec}});
  }
  return json{{"present", one_based(c.present)}, {"recoverable", one_based(c.recoverable)}, {"witnesses", witnesses}};
}

inline ComponentClassification<cdouble> classification_from_json(const json& j) {
  ComponentClassification<cdouble> c;
  for (const auto& v : j.at("present")) c.present.push_back(v.get<Index>() - 1);
  for (const auto& v : j.at("recoverable")) c.recoverable.push_back(v.get<Index>() - 1);
  for (const auto& w : j.at("witnesses")) {
    const auto& b = w.at("b");
    RowVec<cdouble> vec(static_cast<Index>(b.size()));
    for (std::size_t k = 0; k < b.size(); ++k)
      vec(static_cast<Index>(k)) = b[k].is_array() ? cdouble(b[k][0].get<double>(), b[k][1].get<double>())
                                                   : cdouble(b[k].get<double>(), 0.0);
    c.witnesses.emplace(w.at("index").get<Index>() - 1, vec);
  }
  return c;
}

// ---------------------------------------------------------------- EPI

/// Parses an experiment config. "matrix" may be inline or given as "matrix_ref",
/// a path resolved relative to base_dir.
inline EpiExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  try {
    EpiExperimentConfig cfg;
    if (j.contains("matrix")) {
      cfg.matrix = matrix_from_json(j.at("matrix"));
    } else if (j.contains("matrix_ref")) {
      cfg.matrix = matrix_from_json(load_json(base_dir / j.at("matrix_ref").get<std::string>()));
    } else {
      throw Error(ErrorCode::ParseError, "config needs 'matrix' or 'matrix_ref'");
    }
    cfg.sources = sources_from_json(j.at("sources"));
    cfg.n = j.at("N").get<std::size_t>();
    cfg.seed = j.value("seed", kDefaultSeed);
    cfg.trials = j.value("trials", std::size_t{1});
    if (j.contains("estimator")) cfg.estimator = estimator_settings_from_json(j.at("estimator"));
    if (j.contains("expected_gap")) cfg.expected_gap = j.at("expected_gap").get<double>();
    if (j.contains("margin")) cfg.margin = j.at("margin").get<double>();
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("experiment config: ") + e.what());
  }
}

inline json config_to_json(const EpiExperimentConfig& cfg) {
  json sources = json::array();
  for (const auto& s : cfg.sources) sources.push_back(source_to_json(s));
  json j{{"matrix", matrix_to_json(cfg.matrix)}, {"sources", sources}, {"N", cfg.n},
         {"seed", cfg.seed}, {"trials", cfg.trials}, {"estimator", estimator_settings_to_json(cfg.estimator)}};
  if (cfg.expected_gap) j["expected_gap"] = *cfg.expected_gap;
  if (cfg.margin) j["margin"] = *cfg.margin;
  return j;
}

inline json report_to_json(const EpiReport& r) {
  json j;
  j["field"] = to_string(r.field);
  j["rank"] = r.rank;
  j["minus_infinity"] = !r.lhs.has_value();
  j["lhs"] = r.lhs ? estimate_to_json(*r.lhs) : json(nullptr);
  j["rhs"] = r.rhs ? json(*r.rhs) : json(nullptr);
  j["gap"] = r.lhs ? json(r.gap) : json(nullptr);
  j["trial_gaps"] = r.trial_gaps;
  j["tolerance"] = r.tolerance;
  j["classification"] = classification_to_json(r.classification, r.field);
  j["verdict"] = to_string(r.verdict);
  return j;
}

inline EpiReport report_from_json(const json& j) {
  try {
    EpiReport r;
    r.field = parse_field(j.at("field").get<std::string>());
    r.rank = j.at("rank").get<Index>();
    if (!j.at("lhs").is_null()) r.lhs = estimate_from_json(j.at("lhs"));
    if (!j.at("rhs").is_null()) r.rhs = j.at("rhs").get<double>();
    r.gap = j.at("gap").is_null() ? 0.0 : j.at("gap").get<double>();
    r.trial_gaps = j.at("trial_gaps").get<std::vector<double>>();
    r.tolerance = j.at("tolerance").get<double>();
    r.classification = classification_from_json(j.at("classification"));
    r.verdict = parse_verdict(j.at("verdict").get<std::string>());
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("EPI report: ") + e.what());
  }
}

inline json suite_to_json(const EqualitySuiteReport& s) {
  json entries = json::array();
  for (const auto& e : s.entries) {
    json j{{"report", report_to_json(e.report)},
           {"expect_equality", e.expect_equality},
           {"equality_tolerance", e.equality_tolerance},
           {"margin", e.margin},
           {"margin_source", to_string(e.margin_source)},
           {"pilot_gap", e.pilot_gap ? json(*e.pilot_gap) : json(nullptr)},
           {"passed", e.passed}};
    entries.push_back(std::move(j));
  }
  return json{{"entries", entries}, {"all_passed", s.all_passed}};
}

// ---------------------------------------------------------------- samples CSV

/// Writes the rows of a d x N matrix as N observations.
template <class Scalar>
std::string samples_to_csv(const Mat<Scalar>& data) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (Index i = 0; i < data.rows(); ++i) {
    if (i) out << ',';
    if constexpr (std::is_same_v<Scalar, double>)
      out << 's' << (i + 1);
    else
      out << 's' << (i + 1) << "_re,s" << (i + 1) << "_im";
  }
  out << '\n';
  for (Index t = 0; t < data.cols(); ++t) {
    for (Index i = 0; i < data.rows(); ++i) {
      if (i) out << ',';
      if constexpr (std::is_same_v<Scalar, double>)
        out << data(i, t);
      else
        out << data(i, t).real() << ',' << data(i, t).imag();
    }
    out << '\n';
  }
  return out.str();
}

struct SampleTable {
  Field field = Field::Real;
  RealMatrix real;      ///< channels x N, when real
  ComplexMatrix complex;  ///< channels x N, when complex
  Index channels() const { return field == Field::Real ? real.rows() : complex.rows(); }
};

inline SampleTable samples_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "samples CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  if (header.empty()) throw Error(ErrorCode::ParseError, "samples CSV header is empty");
  const bool cplx = header.front().size() > 3 && header.front().ends_with("_re");
  if (cplx && header.size() % 2 != 0) throw Error(ErrorCode::ParseError, "complex CSV needs _re/_im column pairs");
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string idx = std::to_string(cplx ? c / 2 + 1 : c + 1);
    const std::string expect = cplx ? "s" + idx + (c % 2 ? "_im" : "_re") : "s" + idx;
    if (header[c] != expect)
      throw Error(ErrorCode::ParseError, "unexpected CSV column '" + header[c] + "', expected '" + expect + "'");
  }

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "bad number '" + cell + "' on data row " + std::to_string(rows + 1));
      }
      ++count;
    }
    if (count != header.size())
      throw Error(ErrorCode::ParseError, "data row " + std::to_string(rows + 1) + " has " + std::to_string(count) +
                                             " fields, expected " + std::to_string(header.size()));
    ++rows;
  }
  const auto cols = static_cast<Index>(header.size());
  SampleTable t;
  t.field = cplx ? Field::Complex : Field::Real;
  if (!cplx) {
    t.real.resize(cols, static_cast<Index>(rows));
    for (std::size_t r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) t.real(c, static_cast<Index>(r)) = values[r * header.size() + static_cast<std::size_t>(c)];
  } else {
    t.complex.resize(cols / 2, static_cast<Index>(rows));
    for (std::size_t r = 0; r < rows; ++r)
      for (Index c = 0; c < cols / 2; ++c) {
        const std::size_t base = r * header.size() + 2 * static_cast<std::size_t>(c);
        t.complex(c, static_cast<Index>(r)) = cdouble(values[base], values[base + 1]);
      }
  }
  return t;
}

// ---------------------------------------------------------------- extraction

template <class Scalar>
json extraction_to_json(const ExtractionResult<Scalar>& r) {
  json trace = json::array();
  json seeds = json::array();
  for (const auto& t : r.restarts) {
    trace.push_back(json{{"seed", t.seed}, {"sweeps", t.sweeps}, {"converged", t.converged}});
    seeds.push_back(t.seed);
  }
  return json{{"W", matrix_to_json(r.W)}, {"contrast", r.contrast_value}, {"trace", trace},
              {"whitener", matrix_to_json(r.whitener)}, {"seeds", seeds},
              {"best_restart", r.best_restart}, {"converged", r.converged}};
}

inline json quality_to_json(const SeparationQuality& q, double threshold) {
  json argmax = json::array();
  for (Index j : q.argmax) argmax.push_back(j + 1);
  return json{{"dominance", q.dominance}, {"argmax", argmax},     {"min_dominance", q.min_dominance},
              {"distinct", q.distinct},   {"threshold", threshold}, {"success", q.success}};
}

}  // namespace mepi::io
