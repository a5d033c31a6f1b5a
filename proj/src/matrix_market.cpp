#include "uzawa/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

namespace uzawa {

namespace fs = std::filesystem;

namespace {

enum class Layout { coordinate, array };
enum class Symmetry { general, symmetric };

struct Header {
  Layout layout;
  Symmetry symmetry;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t b = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next_raw(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  /// Next line that is neither blank nor a comment.
  bool next_data(std::vector<std::string_view>& tokens) {
    while (next_raw(buf_)) {
      if (!buf_.empty() && buf_[0] == '%') continue;
      tokens = split(buf_);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  std::size_t line() const { return number_; }

 private:
  std::istream& in_;
  std::string buf_;
  std::size_t number_ = 0;
};

Index parse_index(std::string_view tok, std::size_t line, const char* what) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("invalid " + std::string(what) + " '" + std::string(tok) + "'", line);
  return static_cast<Index>(v);
}

double parse_value(std::string_view tok, std::size_t line) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("invalid numeric value '" + std::string(tok) + "'", line);
  return v;
}

Header parse_header(LineReader& r) {
  std::string line;
  if (!r.next_raw(line)) throw ParseError("empty Matrix Market stream", 1);
  const auto tok = split(line);
  if (tok.size() != 5 || tok[0] != "%%MatrixMarket")
    throw ParseError("missing or malformed %%MatrixMarket header", r.line());
  if (lower(std::string(tok[1])) != "matrix")
    throw ParseError("unsupported object '" + std::string(tok[1]) + "'", r.line());
  Header h{};
  const auto layout = lower(std::string(tok[2]));
  if (layout == "coordinate")
    h.layout = Layout::coordinate;
  else if (layout == "array")
    h.layout = Layout::array;
  else
    throw ParseError("unsupported format '" + std::string(tok[2]) + "'", r.line());
  const auto field = lower(std::string(tok[3]));
  if (field == "complex" || field == "pattern")
    throw ParseError("unsupported field '" + field + "' (only real data is accepted)", r.line());
  if (field != "real" && field != "integer" && field != "double")
    throw ParseError("unknown field '" + field + "'", r.line());
  const auto sym = lower(std::string(tok[4]));
  if (sym == "general")
    h.symmetry = Symmetry::general;
  else if (sym == "symmetric")
    h.symmetry = Symmetry::symmetric;
  else
    throw ParseError("unsupported symmetry '" + sym + "'", r.line());
  return h;
}

}  // namespace

SparseMatrix<double> mm_parse(std::istream& in) {
  LineReader r(in);
  const Header hdr = parse_header(r);
  std::vector<std::string_view> tok;
  if (!r.next_data(tok)) throw ParseError("missing size line", r.line() + 1);
  const std::size_t size_line = r.line();
  const std::size_t want = hdr.layout == Layout::coordinate ? 3 : 2;
  if (tok.size() != want)
    throw ParseError("size line must hold " + std::to_string(want) + " integers", size_line);
  const Index rows = parse_index(tok[0], size_line, "row count");
  const Index cols = parse_index(tok[1], size_line, "column count");
  if (rows < 0 || cols < 0) throw ParseError("negative dimension", size_line);
  if (hdr.symmetry == Symmetry::symmetric && rows != cols)
    throw ParseError("symmetric storage requires a square matrix", size_line);

  std::vector<Triplet<double>> entries;
  auto add = [&](Index i, Index j, double v, std::size_t line) {
    if (hdr.symmetry == Symmetry::symmetric && j > i)
      throw ParseError("symmetric storage expects lower-triangle entries only", line);
    entries.push_back({i, j, v});
    if (hdr.symmetry == Symmetry::symmetric && i != j) entries.push_back({j, i, v});
  };

  if (hdr.layout == Layout::coordinate) {
    const Index nnz = parse_index(tok[2], size_line, "entry count");
    if (nnz < 0) throw ParseError("negative entry count", size_line);
    entries.reserve(static_cast<std::size_t>(nnz));
    for (Index e = 0; e < nnz; ++e) {
      if (!r.next_data(tok))
        throw ParseError("expected " + std::to_string(nnz) + " entries, found " +
                             std::to_string(e),
                         r.line());
      if (tok.size() != 3) throw ParseError("coordinate entry must be 'row col value'", r.line());
      const Index i = parse_index(tok[0], r.line(), "row index");
      const Index j = parse_index(tok[1], r.line(), "column index");
      if (i < 1 || i > rows || j < 1 || j > cols)
        throw ParseError("entry (" + std::to_string(i) + ", " + std::to_string(j) +
                             ") outside a " + std::to_string(rows) + "x" + std::to_string(cols) +
                             " matrix",
                         r.line());
      add(i - 1, j - 1, parse_value(tok[2], r.line()), r.line());
    }
  } else {
    // Column-major; symmetric arrays store the lower triangle only.
    for (Index j = 0; j < cols; ++j) {
      for (Index i = hdr.symmetry == Symmetry::symmetric ? j : 0; i < rows; ++i) {
        if (!r.next_data(tok)) throw ParseError("array data ends early", r.line());
        if (tok.size() != 1) throw ParseError("array entry must be a single value", r.line());
        const double v = parse_value(tok[0], r.line());
        if (v != 0.0) add(i, j, v, r.line());
      }
    }
  }
  if (r.next_data(tok)) throw ParseError("unexpected data after the last entry", r.line());
  return from_triplets(rows, cols, entries);
}

SparseMatrix<double> mm_read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return mm_parse(in);
  } catch (const ParseError& e) {
    throw ParseError(path.filename().string() + ": " + e.message(), e.line());
  }
}

VectorX<double> mm_parse_vector(std::istream& in) {
  const SparseMatrix<double> m = mm_parse(in);
  if (m.cols() != 1)
    throw ParseError("expected a column vector, got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()),
                     0);
  VectorX<double> v = VectorX<double>::Zero(m.rows());
  for (Index i = 0; i < m.rows(); ++i) v[i] = m.coeff(i, 0);
  return v;
}

VectorX<double> mm_read_vector(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return mm_parse_vector(in);
  } catch (const ParseError& e) {
    throw ParseError(path.filename().string() + ": " + e.message(), e.line());
  }
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void mm_write(std::ostream& out, const SparseMatrix<double>& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    const auto cols = m.row_cols(i);
    const auto vals = m.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p)
      out << i + 1 << ' ' << cols[p] + 1 << ' ' << fmt17(vals[p]) << '\n';
  }
}

void mm_write(const fs::path& path, const SparseMatrix<double>& m) {
  auto out = open_out(path);
  mm_write(out, m);
  if (!out) throw IoError("write failed: " + path.string());
}

void mm_write_vector(std::ostream& out, const VectorX<double>& v) {
  out << "%%MatrixMarket matrix array real general\n";
  out << v.size() << " 1\n";
  for (Index i = 0; i < v.size(); ++i) out << fmt17(v[i]) << '\n';
}

void mm_write_vector(const fs::path& path, const VectorX<double>& v) {
  auto out = open_out(path);
  mm_write_vector(out, v);
  if (!out) throw IoError("write failed: " + path.string());
}

SaddleSystem<double> read_system(const fs::path& bundle, BundleManifest* manifest) {
  if (!fs::is_directory(bundle)) throw IoError("bundle not found: " + bundle.string());
  if (fs::exists(bundle / "B1.mtx") || fs::exists(bundle / "B2.mtx"))
    throw DimensionError(
        "bundle " + bundle.string() +
        " has separate B1/B2 coupling blocks; only systems with B1 = B2 = B are supported, "
        "provide a single B.mtx");

  BundleManifest meta;
  meta.name = bundle.filename().string();
  bool have_manifest = false;
  if (fs::exists(bundle / "manifest.json")) {
    std::ifstream in(bundle / "manifest.json");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest.json: " + std::string(e.what()), 0);
    }
    have_manifest = true;
    meta.name = j.value("name", meta.name);
    meta.n = j.value("n", Index{0});
    meta.m = j.value("m", Index{0});
    meta.params = j.value("params", nlohmann::json::object());
    meta.c_zero = j.value("c_zero", false) || j.value("C", std::string()) == "zero";
  }

  for (const char* f : {"A.mtx", "B.mtx", "f.mtx", "h.mtx"})
    if (!fs::exists(bundle / f)) throw IoError("bundle " + bundle.string() + " lacks " + f);

  SparseMatrix<double> a = mm_read(bundle / "A.mtx");
  SparseMatrix<double> b = mm_read(bundle / "B.mtx");
  VectorX<double> f = mm_read_vector(bundle / "f.mtx");
  VectorX<double> h = mm_read_vector(bundle / "h.mtx");
  const Index n = a.rows(), m = b.rows();
  SparseMatrix<double> c(m, m);
  if (fs::exists(bundle / "C.mtx")) {
    c = mm_read(bundle / "C.mtx");
  } else if (have_manifest && !meta.c_zero) {
    throw IoError("bundle " + bundle.string() + " lacks C.mtx but its manifest does not mark C as zero");
  }

  auto mismatch = [&](const std::string& what) {
    throw DimensionError("bundle " + bundle.string() + ": " + what);
  };
  if (a.cols() != n) mismatch("A.mtx is " + std::to_string(n) + "x" + std::to_string(a.cols()) + ", expected square");
  if (b.cols() != n) mismatch("B.mtx has " + std::to_string(b.cols()) + " columns, A.mtx has " + std::to_string(n));
  if (c.rows() != m || c.cols() != m) mismatch("C.mtx must be " + std::to_string(m) + "x" + std::to_string(m));
  if (f.size() != n) mismatch("f.mtx has length " + std::to_string(f.size()) + ", expected " + std::to_string(n));
  if (h.size() != m) mismatch("h.mtx has length " + std::to_string(h.size()) + ", expected " + std::to_string(m));
  if (have_manifest && ((meta.n && meta.n != n) || (meta.m && meta.m != m)))
    mismatch("manifest dimensions disagree with the matrices");

  meta.n = n;
  meta.m = m;
  meta.c_zero = c.nonZeros() == 0;
  if (manifest) *manifest = meta;
  return make_saddle_system(std::move(a), std::move(b), std::move(c), std::move(f), std::move(h));
}

void write_system(const SaddleSystem<double>& sys, const fs::path& bundle, BundleManifest meta,
                  bool force) {
  validate(sys);
  if (fs::exists(bundle)) {
    if (!fs::is_directory(bundle)) throw IoError(bundle.string() + " exists and is not a directory");
    const bool occupied = fs::exists(bundle / "manifest.json") || fs::exists(bundle / "A.mtx");
    if (occupied && !force)
      throw IoError("bundle " + bundle.string() + " already exists (use --force to overwrite)");
  }
  std::error_code ec;
  fs::create_directories(bundle, ec);
  if (ec) throw IoError("cannot create " + bundle.string() + ": " + ec.message());

  meta.n = sys.n();
  meta.m = sys.m();
  meta.c_zero = sys.C.nonZeros() == 0;
  mm_write(bundle / "A.mtx", sys.A);
  mm_write(bundle / "B.mtx", sys.B);
  if (meta.c_zero)
    fs::remove(bundle / "C.mtx");
  else
    mm_write(bundle / "C.mtx", sys.C);
  mm_write_vector(bundle / "f.mtx", sys.f);
  mm_write_vector(bundle / "h.mtx", sys.h);

  nlohmann::json j;
  j["name"] = meta.name;
  j["n"] = meta.n;
  j["m"] = meta.m;
  j["params"] = meta.params;
  j["c_zero"] = meta.c_zero;
  if (meta.c_zero) j["C"] = "zero";
  auto out = open_out(bundle / "manifest.json");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + (bundle / "manifest.json").string());
}

}  // namespace uzawa
