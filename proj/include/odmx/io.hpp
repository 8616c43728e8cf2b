#ifndef ODMX_IO_HPP
#define ODMX_IO_HPP

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "odmx/algorithms.hpp"
#include "odmx/errors.hpp"
#include "odmx/markov_basis.hpp"
#include "odmx/matrix.hpp"
#include "odmx/table.hpp"

namespace odmx {

namespace fs = std::filesystem;

class IoError : public Error {
 public:
  using Error::Error;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << content;
}

/// Shortest round-trip decimal form.
inline std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::vector<std::string>> split_csv(const std::string& text, const std::string& where,
                                                       bool allow_empty = false) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.emplace_back();
    rows.push_back(std::move(fields));
  }
  if (rows.empty() && !allow_empty) throw IoError(where + ": no data");
  return rows;
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  T v{};
  try {
    if constexpr (std::is_integral_v<T>) v = static_cast<T>(std::stoll(s, &used));
    else v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw IoError(where + ": cannot parse '" + s + "'");
  }
  while (used < s.size() && (s[used] == ' ' || s[used] == '\t')) ++used;
  if (used != s.size()) throw IoError(where + ": trailing characters in '" + s + "'");
  return v;
}

}  // namespace detail

template <typename T>
Matrix<T> read_matrix_csv(const fs::path& p) {
  const auto rows = detail::split_csv(read_file(p), p.string());
  std::vector<std::vector<T>> out;
  for (const auto& r : rows) {
    std::vector<T> v;
    for (const auto& f : r) v.push_back(detail::parse_number<T>(f, p.string()));
    out.push_back(std::move(v));
  }
  return Matrix<T>::from_rows(out);
}

/// A vector stored on one line or one value per line.
template <typename T>
std::vector<T> read_vector_csv(const fs::path& p) {
  const auto m = read_matrix_csv<T>(p);
  if (m.rows() != 1 && m.cols() != 1) throw IoError(p.string() + ": expected a single row or column");
  return m.values();
}

template <typename T>
std::string matrix_csv(const Matrix<T>& m) {
  std::string s;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) s += ',';
      if constexpr (std::is_integral_v<T>) s += std::to_string(m(i, j));
      else s += fmt_real(m(i, j));
    }
    s += '\n';
  }
  return s;
}

template <typename T>
std::string vector_csv(const std::vector<T>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ',';
    if constexpr (std::is_integral_v<T>) s += std::to_string(v[k]);
    else s += fmt_real(v[k]);
  }
  return s + '\n';
}

inline Table read_table_csv(const fs::path& p) { return Table(read_matrix_csv<Count>(p)); }

/// Fixed cells as lines "i,j,value".
inline std::pair<CellSet, std::vector<Count>> read_fixed_cells_csv(const fs::path& p) {
  const auto m = read_matrix_csv<Count>(p);
  if (m.cols() != 3) throw IoError(p.string() + ": fixed cells need three columns i,j,value");
  std::vector<std::pair<Cell, Count>> cells;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m(r, 0) < 0 || m(r, 1) < 0) throw IoError(p.string() + ": negative cell index");
    cells.push_back({Cell{static_cast<std::size_t>(m(r, 0)), static_cast<std::size_t>(m(r, 1))}, m(r, 2)});
  }
  std::sort(cells.begin(), cells.end());
  std::vector<Cell> c;
  std::vector<Count> v;
  for (const auto& [cell, value] : cells) {
    c.push_back(cell);
    v.push_back(value);
  }
  return {CellSet(std::move(c)), std::move(v)};
}

inline std::string fixed_cells_csv(const CellSet& cells, const std::vector<Count>& values) {
  std::string s;
  for (std::size_t k = 0; k < cells.size(); ++k)
    s += std::to_string(cells[k].i) + "," + std::to_string(cells[k].j) + "," + std::to_string(values[k]) + "\n";
  return s;
}

inline std::string basis_csv(const MarkovBasis& b) {
  std::string s;
  for (const BasisMove& f : b.moves())
    s += std::to_string(f.i1) + "," + std::to_string(f.j1) + "," + std::to_string(f.i2) + "," + std::to_string(f.j2) + "\n";
  return s;
}

// Binary trace: "ODMX1", uint64 rows, uint64 cols, then row-major int64
// cells per sample until end of file; all little-endian.
inline constexpr char kTraceMagic[5] = {'O', 'D', 'M', 'X', '1'};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  auto u = static_cast<std::uint64_t>(v);
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((u >> (8 * k)) & 0xff);
  out.write(b, 8);
}

inline bool get_le(std::istream& in, std::uint64_t& v) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return true;
}

}  // namespace detail

class TableTraceWriter {
 public:
  TableTraceWriter(const fs::path& p, std::size_t rows, std::size_t cols) : out_(p, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + p.string());
    out_.write(kTraceMagic, 5);
    detail::put_le(out_, rows);
    detail::put_le(out_, cols);
  }
  void write(const Table& t) {
    for (Count v : t.matrix().flat()) detail::put_le(out_, v);
  }

 private:
  std::ofstream out_;
};

inline std::vector<Table> read_table_trace(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  char magic[5];
  if (!in.read(magic, 5) || !std::equal(magic, magic + 5, kTraceMagic)) throw IoError(p.string() + ": bad magic");
  std::uint64_t rows = 0, cols = 0;
  if (!detail::get_le(in, rows) || !detail::get_le(in, cols)) throw IoError(p.string() + ": truncated header");
  std::vector<Table> out;
  for (;;) {
    CountMatrix m(rows, cols);
    std::uint64_t v = 0;
    if (!detail::get_le(in, v)) break;
    m.flat()[0] = static_cast<Count>(v);
    for (std::size_t k = 1; k < m.size(); ++k) {
      if (!detail::get_le(in, v)) throw IoError(p.string() + ": truncated sample");
      m.flat()[k] = static_cast<Count>(v);
    }
    out.emplace_back(std::move(m));
  }
  return out;
}

/// Streams emitted states to theta.csv, x.csv and tables.bin in `dir`.
class FileSink final : public SampleSink {
 public:
  FileSink(const fs::path& dir, std::size_t rows, std::size_t cols)
      : theta_(dir / "theta.csv"), x_(dir / "x.csv"), tables_(dir / "tables.bin", rows, cols) {
    if (!theta_ || !x_) throw IoError("cannot write trace files in " + dir.string());
    theta_ << "step,alpha,beta,sign,gamma\n";
  }
  void emit(const ChainState& s) override {
    theta_ << s.step << ',' << fmt_real(s.theta.alpha) << ',' << fmt_real(s.theta.beta) << ',' << s.sign << ','
           << fmt_real(s.gamma) << '\n';
    x_ << s.step;
    for (double v : s.x) x_ << ',' << fmt_real(v);
    x_ << '\n';
    tables_.write(s.table);
  }

 private:
  std::ofstream theta_, x_;
  TableTraceWriter tables_;
};

/// Reads a chain directory back into a trace.
inline SampleTrace read_chain_dir(const fs::path& dir) {
  SampleTrace t;
  t.tables = read_table_trace(dir / "tables.bin");
  const auto th = detail::split_csv(read_file(dir / "theta.csv"), (dir / "theta.csv").string());
  for (std::size_t r = 1; r < th.size(); ++r) {
    if (th[r].size() < 4) throw IoError("theta.csv: short row");
    t.steps.push_back(detail::parse_number<std::size_t>(th[r][0], "theta.csv"));
    t.thetas.push_back({detail::parse_number<double>(th[r][1], "theta.csv"), detail::parse_number<double>(th[r][2], "theta.csv")});
    t.signs.push_back(detail::parse_number<int>(th[r][3], "theta.csv"));
    t.gammas.push_back(th[r].size() > 4 ? detail::parse_number<double>(th[r][4], "theta.csv") : 0.0);
  }
  const auto xs = detail::split_csv(read_file(dir / "x.csv"), (dir / "x.csv").string(), true);
  for (const auto& row : xs) {
    std::vector<double> x;
    for (std::size_t k = 1; k < row.size(); ++k) x.push_back(detail::parse_number<double>(row[k], "x.csv"));
    t.xs.push_back(std::move(x));
  }
  if (t.xs.size() != t.tables.size() || t.thetas.size() != t.tables.size())
    throw IoError(dir.string() + ": trace streams differ in length");
  return t;
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string content_hash(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace odmx

#endif  // ODMX_IO_HPP
