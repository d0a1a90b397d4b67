#pragma once

// Plain-text matrix files: a "rows cols" header line, then one
// whitespace-separated row per line at 17 significant digits.

#include "amca/core.hpp"
#include "amca/spcgen.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace amca {

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << detail::format_double(m(i, j));
    }
    out << '\n';
  }
}

inline Matrix read_matrix(std::istream& in, const std::string& context = "matrix") {
  long long rows = -1, cols = -1;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) {
    throw IoError(context + ": missing or bad 'rows cols' header");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      // operator>> rejects "nan" and "inf", so go through strtod.
      std::string token;
      if (!(in >> token)) {
        throw IoError(context + ": expected " + std::to_string(rows * cols) + " values, got " +
                      std::to_string(i * cols + j));
      }
      char* end = nullptr;
      m(i, j) = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size()) {
        throw IoError(context + ": bad number '" + token + "'");
      }
    }
  }
  std::string extra;
  if (in >> extra) throw IoError(context + ": trailing data after " + std::to_string(rows * cols) + " values");
  return m;
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_matrix(out, m);
  if (!out) throw IoError("write failed: " + path.string());
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_matrix(in, path.string());
}

inline nlohmann::json supports_to_json(const SupportSets& s) {
  return {{"shared", s.shared}, {"independent", s.independent}};
}

inline SupportSets supports_from_json(const nlohmann::json& j) {
  SupportSets s;
  j.at("shared").get_to(s.shared);
  j.at("independent").get_to(s.independent);
  return s;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

/// Writes S.mat, A.mat, Z.mat, X.mat and supports.json into `dir`.
inline void write_ground_truth(const std::filesystem::path& dir, const GroundTruth& truth) {
  std::filesystem::create_directories(dir);
  write_matrix(dir / "S.mat", truth.sources);
  write_matrix(dir / "A.mat", truth.mixing);
  write_matrix(dir / "Z.mat", truth.noise);
  write_matrix(dir / "X.mat", truth.observations);
  write_json(dir / "supports.json", supports_to_json(truth.supports));
}

inline GroundTruth read_ground_truth(const std::filesystem::path& dir) {
  GroundTruth truth;
  truth.sources = read_matrix(dir / "S.mat");
  truth.mixing = read_matrix(dir / "A.mat");
  truth.noise = read_matrix(dir / "Z.mat");
  truth.observations = read_matrix(dir / "X.mat");
  if (std::filesystem::exists(dir / "supports.json")) {
    try {
      truth.supports = supports_from_json(read_json(dir / "supports.json"));
    } catch (const nlohmann::json::exception& e) {
      throw IoError((dir / "supports.json").string() + ": " + e.what());
    }
  }
  if (truth.mixing.rows() != truth.observations.rows() ||
      truth.mixing.cols() != truth.sources.rows() ||
      truth.sources.cols() != truth.observations.cols() ||
      truth.noise.rows() != truth.observations.rows() ||
      truth.noise.cols() != truth.observations.cols()) {
    throw IoError(dir.string() + ": matrix shapes are inconsistent");
  }
  return truth;
}

}  // namespace amca
