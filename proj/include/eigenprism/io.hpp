#pragma once

// Delimited-text readers and structured-record helpers used by the CLI.

#include "eigenprism/core_model.hpp"
#include "eigenprism/error.hpp"
#include "eigenprism/estimators.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace eigenprism::io {

struct Table {
  std::vector<std::string> header;
  Matrix values;

  Index column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<Index>(j);
    }
    throw Error(ErrorCode::ParseError, "no column named '" + name + "'");
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, delim)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads comma- or tab-separated numbers. A first row that does not parse
/// as numbers is taken as the header.
inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty() || line[0] == '#') continue;
    lines.push_back(std::move(line));
  }
  if (lines.empty()) throw Error(ErrorCode::ParseError, path + " is empty");
  const char delim = lines.front().find('\t') != std::string::npos ? '\t' : ',';

  Table t;
  std::size_t first = 0;
  const auto head = detail::split(lines.front(), delim);
  bool numeric = true;
  for (const auto& f : head) numeric = numeric && detail::parse_double(f).has_value();
  if (!numeric) {
    t.header = head;
    first = 1;
  }
  const std::size_t cols = head.size();
  t.values.resize(static_cast<Index>(lines.size() - first), static_cast<Index>(cols));
  for (std::size_t r = first; r < lines.size(); ++r) {
    const auto fields = detail::split(lines[r], delim);
    if (fields.size() != cols) {
      throw Error(ErrorCode::ParseError, path + ":" + std::to_string(r + 1) + ": expected " + std::to_string(cols) +
                                             " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const auto v = detail::parse_double(fields[c]);
      if (!v) {
        throw Error(ErrorCode::ParseError,
                    path + ":" + std::to_string(r + 1) + ": '" + fields[c] + "' is not a number");
      }
      t.values(static_cast<Index>(r - first), static_cast<Index>(c)) = *v;
    }
  }
  return t;
}

/// All entries of a single-row or single-column file.
inline Vector read_vector(const std::string& path) {
  const Table t = read_table(path);
  if (t.values.cols() != 1 && t.values.rows() != 1) {
    throw Error(ErrorCode::ParseError, path + " must hold a single row or column");
  }
  return Eigen::Map<const Vector>(t.values.data(), t.values.size());
}

/// 1-based column indices, converted to 0-based.
inline std::vector<Index> read_indices(const std::string& path) {
  const Vector v = read_vector(path);
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(v.size()));
  for (double x : v) {
    if (x < 1.0 || x != std::floor(x)) {
      throw Error(ErrorCode::ParseError, "subset entry " + std::to_string(x) + " is not a positive integer");
    }
    out.push_back(static_cast<Index>(x) - 1);
  }
  return out;
}

/// Design and response from one file (response named by `response`) or from
/// a design file plus a separate response file.
inline Dataset load_dataset(const std::string& path, const std::string& response,
                            const std::optional<std::string>& response_path = std::nullopt) {
  Table t = read_table(path);
  if (response_path) return Dataset(std::move(t.values), read_vector(*response_path));
  Index col = t.values.cols() - 1;
  if (!response.empty()) {
    if (!t.header.empty()) {
      col = t.column(response);
    } else {
      throw Error(ErrorCode::ParseError, path + " has no header, so column '" + response + "' cannot be found");
    }
  }
  if (t.values.cols() < 2) throw Error(ErrorCode::ParseError, path + " needs a design column and a response");
  Vector y = t.values.col(col);
  Matrix X(t.values.rows(), t.values.cols() - 1);
  for (Index j = 0, k = 0; j < t.values.cols(); ++j) {
    if (j != col) X.col(k++) = t.values.col(j);
  }
  return Dataset(std::move(X), std::move(y));
}

inline void write_table(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
  out.precision(17);
  for (Index j = 0; j < d.p(); ++j) out << 'x' << (j + 1) << ',';
  out << "y\n";
  for (Index i = 0; i < d.n(); ++i) {
    for (Index j = 0; j < d.p(); ++j) out << d.X()(i, j) << ',';
    out << d.y()[i] << '\n';
  }
}

inline nlohmann::ordered_json to_json(const IntervalEstimate& e) {
  nlohmann::ordered_json j;
  j["estimand"] = std::string(to_string(e.estimand));
  j["point"] = e.point;
  j["lower"] = e.lower;
  j["upper"] = e.upper;
  j["alpha"] = e.alpha;
  j["sd_bound"] = e.sd_bound;
  j["clipped_lower"] = e.clipped_lower;
  j["clipped_upper"] = e.clipped_upper;
  j["raw_point"] = e.raw_point;
  if (e.two_step_fallback) j["two_step_fallback"] = true;
  if (e.solver) {
    nlohmann::ordered_json s;
    s["objective"] = e.solver->objective;
    if (std::isfinite(e.solver->delta)) s["delta"] = e.solver->delta;
    s["kappa1"] = e.solver->kappa1;
    s["kappa2"] = e.solver->kappa2;
    s["duality_gap"] = e.solver->duality_gap;
    s["kkt_residual"] = e.solver->kkt_residual;
    if (e.solver->rho_hat) s["rho_hat"] = *e.solver->rho_hat;
    j["solver"] = s;
  }
  return j;
}

}  // namespace eigenprism::io
