#pragma once

/// \file io.hpp
/// \brief CSV matrices with shortest round-trip number formatting, and flat key = value config files.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bayesij/core.hpp"

namespace bayesij {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace detail

struct LoadedMatrix {
  Matrix values;
  std::vector<std::string> header;
};

inline LoadedMatrix parse_matrix(const std::string& text, const std::string& source = "<memory>") {
  std::vector<std::vector<double>> rows;
  LoadedMatrix out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    const auto cells = detail::split_commas(view);
    std::vector<double> row(cells.size());
    bool numeric = true;
    std::size_t bad_col = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!detail::parse_double(cells[c], row[c])) {
        numeric = false;
        bad_col = c + 1;
        break;
      }
    }
    if (first && !numeric) {
      for (auto c : cells) out.header.emplace_back(c);
      width = cells.size();
      first = false;
      continue;
    }
    if (!numeric) {
      fail(ErrorCode::ParseError, source + ": non-numeric cell at row " + std::to_string(line_no) + ", column " +
                                      std::to_string(bad_col));
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      fail(ErrorCode::ParseError, source + ": ragged row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                      " columns, expected " + std::to_string(width));
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!std::isfinite(row[c])) {
        fail(ErrorCode::ParseError, source + ": non-finite cell at row " + std::to_string(line_no) + ", column " +
                                        std::to_string(c + 1));
      }
    }
    rows.push_back(std::move(row));
    first = false;
  }
  if (rows.empty()) fail(ErrorCode::ParseError, source + ": no numeric rows");
  out.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c) out.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return out;
}

inline LoadedMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ParseError, path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_matrix(ss.str(), path.string());
}

/// A single row or column flattened to a vector.
inline Vector load_vector(const std::filesystem::path& path) {
  const LoadedMatrix m = load_matrix(path);
  if (m.values.cols() == 1) return m.values.col(0);
  if (m.values.rows() == 1) return m.values.row(0).transpose();
  fail(ErrorCode::ParseError, path.string() + ": expected a single row or column, got " + detail::shape(m.values));
}

inline std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_number(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline std::vector<std::string> numbered_header(const std::string& prefix, Index count) {
  std::vector<std::string> h;
  for (Index j = 0; j < count; ++j) h.push_back(prefix + std::to_string(j + 1));
  return h;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::InvalidInput, path.string() + ": cannot open for writing");
  out << text;
  if (!out) fail(ErrorCode::InvalidInput, path.string() + ": write failed");
}

inline void save_matrix(const std::filesystem::path& path, const Matrix& m, std::vector<std::string> header = {}) {
  if (header.empty()) header = numbered_header("c", m.cols());
  write_text(path, matrix_to_csv(m, header));
}

/// Flat `key = value` lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_config(const std::string& text, const std::string& source = "<config>") {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v = line;
    if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = detail::trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) fail(ErrorCode::ParseError, source + ": line " + std::to_string(line_no) + " lacks '='");
    const std::string key(detail::trim(v.substr(0, eq)));
    const std::string value(detail::trim(v.substr(eq + 1)));
    if (key.empty()) fail(ErrorCode::ParseError, source + ": empty key on line " + std::to_string(line_no));
    out[key] = value;
  }
  return out;
}

inline std::map<std::string, std::string> load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ParseError, path.string() + ": cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

/// Bar chart of eigenvalues as a standalone SVG document.
inline std::string scree_svg(const Vector& eigenvalues, bool log_y = false) {
  const int width = 640, height = 360, margin = 40;
  const Index count = eigenvalues.size();
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" fill=\"white\"/>\n";
  svg += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" + std::to_string(height - margin) + "\" x2=\"" +
         std::to_string(width - margin / 2) + "\" y2=\"" + std::to_string(height - margin) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(margin) + "\" y1=\"" + std::to_string(margin / 2) + "\" x2=\"" + std::to_string(margin) +
         "\" y2=\"" + std::to_string(height - margin) + "\" stroke=\"black\"/>\n";
  if (count > 0) {
    double top = 0.0, low = 0.0;
    for (Index a = 0; a < count; ++a) top = std::max(top, eigenvalues[a]);
    if (log_y) {
      low = top;
      for (Index a = 0; a < count; ++a)
        if (eigenvalues[a] > 0.0) low = std::min(low, eigenvalues[a]);
      low = std::max(low, top * 1e-16);
    }
    const double plot_w = width - 1.5 * margin;
    const double plot_h = height - 1.5 * margin;
    const double bar_w = plot_w / static_cast<double>(count);
    for (Index a = 0; a < count; ++a) {
      double frac = 0.0;
      if (top > 0.0) {
        if (log_y) {
          const double v = std::max(eigenvalues[a], low);
          frac = top > low ? (std::log10(v) - std::log10(low)) / (std::log10(top) - std::log10(low)) : 1.0;
          frac = 0.02 + 0.98 * frac;
        } else {
          frac = std::max(eigenvalues[a], 0.0) / top;
        }
      }
      const double h = frac * plot_h;
      svg += "<rect x=\"" + format_number(margin + a * bar_w + 0.1 * bar_w) + "\" y=\"" + format_number(height - margin - h) +
             "\" width=\"" + format_number(0.8 * bar_w) + "\" height=\"" + format_number(h) + "\" fill=\"steelblue\"><title>" +
             std::to_string(a + 1) + ": " + format_number(eigenvalues[a]) + "</title></rect>\n";
    }
    svg += "<text x=\"" + std::to_string(margin) + "\" y=\"" + std::to_string(margin / 2 - 4 + 10) +
           "\" font-size=\"10\" font-family=\"sans-serif\">max " + format_number(top) + (log_y ? " (log scale)" : "") + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace bayesij
