#ifndef LVE_LATENT_IO_HPP
#define LVE_LATENT_IO_HPP

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lve/error.hpp"

namespace lve {

/// Latent files hold numbers separated by whitespace or commas; '#' starts a comment.
inline std::vector<double> parse_latent(const std::string& text) {
  std::vector<double> out;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream words(line);
    std::string word;
    while (words >> word) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(word, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != word.size()) throw InputError("latent file: cannot parse '" + word + "' as a number");
      if (!std::isfinite(v)) throw NonFiniteInput("latent file: non-finite value '" + word + "'");
      out.push_back(v);
    }
  }
  return out;
}

inline std::vector<double> load_latent(const std::string& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open latent file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::vector<double> z = parse_latent(buf.str());
  if (z.size() != expected)
    throw ShapeMismatch("latent file " + path + " has " + std::to_string(z.size()) + " values, expected " +
                        std::to_string(expected));
  return z;
}

/// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_latent(const std::vector<double>& z) {
  std::string out;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i) out += ' ';
    out += format_number(z[i]);
  }
  out += '\n';
  return out;
}

inline void save_latent(const std::vector<double>& z, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write latent file: " + path);
  out << format_latent(z);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace lve

#endif  // LVE_LATENT_IO_HPP
