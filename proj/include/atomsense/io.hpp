#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "atomsense/errors.hpp"
#include "atomsense/sensors_noise.hpp"

namespace atomsense::io {

// FNV-1a, 64 bit; stable across platforms, used to tag outputs with their
// configuration.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Shortest representation that round-trips.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), end);
}

struct Metadata {
  std::vector<std::pair<std::string, std::string>> entries;

  Metadata& add(std::string key, std::string value) {
    entries.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  Metadata& add(std::string key, double value) { return add(std::move(key), fmt(value)); }
};

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const Metadata& meta,
            const std::vector<std::string>& columns)
      : path_(path), out_(path, std::ios::binary), n_cols_(columns.size()) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    for (const auto& [k, v] : meta.entries) out_ << "# " << k << ": " << v << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }

  // Fields are written verbatim; numbers go through fmt().
  void row(const std::vector<std::string>& fields) {
    if (fields.size() != n_cols_) throw std::logic_error("CsvWriter: column count mismatch");
    for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> f;
    f.reserve(values.size());
    for (double v : values) f.push_back(fmt(v));
    row(f);
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t n_cols_;
};

struct CsvTable {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // source line of each row

  std::size_t column_index(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ConfigError("column '" + name + "' not found");
    return static_cast<std::size_t>(it - columns.begin());
  }

  std::vector<double> numeric(const std::string& name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string& s = rows[r][c];
      double v = 0.0;
      auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || end != s.data() + s.size()) {
        throw ConfigError("line " + std::to_string(line_numbers[r]) + ": '" + s +
                          "' in column '" + name + "' is not a number");
      }
      out.push_back(v);
    }
    return out;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos) {
        std::string key = line.substr(1, colon - 1);
        std::string value = line.substr(colon + 1);
        auto trim = [](std::string& s) {
          s.erase(0, s.find_first_not_of(" \t\r"));
          s.erase(s.find_last_not_of(" \t\r") + 1);
        };
        trim(key);
        trim(value);
        t.metadata[key] = value;
      }
      continue;
    }
    auto fields = split_csv_line(line);
    if (t.columns.empty()) {
      t.columns = std::move(fields);
      continue;
    }
    if (fields.size() != t.columns.size()) {
      throw ConfigError(path.string() + " line " + std::to_string(lineno) + ": expected " +
                        std::to_string(t.columns.size()) + " fields, found " +
                        std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (t.columns.empty()) throw ConfigError(path.string() + ": no header row");
  return t;
}

// ---------------------------------------------------------- binary traces ----

inline constexpr char kTraceMagic[8] = {'A', 'T', 'M', 'S', 'N', 'S', '0', '1'};

namespace detail {

inline void put_f64(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw ConfigError("truncated binary trace");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

/// Magic, then sample_rate, start_time and the count as float64, then the
/// samples; all little-endian.
inline void write_trace_binary(const std::filesystem::path& path, const SensorTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kTraceMagic, 8);
  detail::put_f64(out, trace.sample_rate);
  detail::put_f64(out, trace.start_time);
  detail::put_f64(out, static_cast<double>(trace.size()));
  for (double v : trace.samples) detail::put_f64(out, v);
}

inline SensorTrace read_trace_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kTraceMagic, 8) != 0) {
    throw ConfigError(path.string() + ": not an ATMSNS01 trace");
  }
  SensorTrace t;
  t.sample_rate = detail::get_f64(in);
  t.start_time = detail::get_f64(in);
  const auto n = static_cast<std::size_t>(detail::get_f64(in));
  t.samples.resize(n);
  for (auto& v : t.samples) v = detail::get_f64(in);
  return t;
}

}  // namespace atomsense::io
