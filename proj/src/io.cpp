#include "hyperreg/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <nlohmann/json.hpp>

#include "hyperreg/errors.hpp"

namespace hyperreg {
namespace {

struct Token {
  std::string_view text;
  std::size_t line;
};

class TokenStream {
 public:
  explicit TokenStream(std::string_view text) {
    std::size_t line = 1;
    std::size_t i = 0;
    while (i < text.size()) {
      const char c = text[i];
      if (c == '\n') {
        ++line;
        ++i;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++i;
      } else {
        const std::size_t start = i;
        while (i < text.size() && text[i] != '\n' && text[i] != ' ' && text[i] != '\t' &&
               text[i] != '\r')
          ++i;
        tokens_.push_back({text.substr(start, i - start), line});
      }
    }
    last_line_ = line;
  }

  bool done() const { return pos_ >= tokens_.size(); }
  std::size_t line() const { return done() ? last_line_ : tokens_[pos_].line; }

  const Token& next(const char* what) {
    if (done()) throw ParseError(std::string("unexpected end of file, expected ") + what, last_line_);
    return tokens_[pos_++];
  }
  const Token& peek() const { return tokens_[pos_]; }

  void expect(std::string_view word) {
    const Token& t = next(std::string(word).c_str());
    if (t.text != word)
      throw ParseError("expected '" + std::string(word) + "', got '" + std::string(t.text) + "'",
                       t.line);
  }

  std::size_t count(const char* what) {
    const Token& t = next(what);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || p != t.text.data() + t.text.size())
      throw ParseError(std::string("invalid ") + what + " '" + std::string(t.text) + "'", t.line);
    return v;
  }

  double real(const char* what) {
    const Token& t = next(what);
    double v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || p != t.text.data() + t.text.size())
      throw ParseError(std::string("invalid ") + what + " '" + std::string(t.text) + "'", t.line);
    return v;
  }

  /// Skips tokens until the end of the current line (used for header text).
  void skip_line(std::size_t line) {
    while (!done() && tokens_[pos_].line == line) ++pos_;
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::size_t last_line_ = 1;
};

void expect_scalar_type(TokenStream& ts) {
  const Token& t = ts.next("data type");
  if (t.text != "double" && t.text != "float")
    throw ParseError("unsupported data type '" + std::string(t.text) + "'", t.line);
}

}  // namespace

const NodalField* MeshFile::field(std::string_view name) const {
  for (const auto& f : point_vectors)
    if (f.name == name) return &f.values;
  return nullptr;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, p);
}

MeshFile parse_vtk(std::string_view text, std::vector<std::size_t> dirichlet_nodes) {
  // Header lines are matched line-wise; the body is token-based.
  std::size_t pos = 0;
  auto getline = [&](std::size_t lineno) {
    if (pos >= text.size()) throw ParseError("truncated header", lineno);
    const std::size_t end = text.find('\n', pos);
    std::string_view l = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    while (!l.empty() && (l.back() == '\r' || l.back() == ' ')) l.remove_suffix(1);
    return l;
  };
  if (getline(1).rfind("# vtk DataFile Version", 0) != 0)
    throw ParseError("missing '# vtk DataFile Version' header", 1);
  getline(2);  // title
  if (getline(3) != "ASCII") throw ParseError("only ASCII VTK files are supported", 3);

  TokenStream ts(text.substr(pos));
  auto line_of = [&](std::size_t l) { return l + 3; };
  try {
    ts.expect("DATASET");
    ts.expect("UNSTRUCTURED_GRID");

    std::vector<Vec3> points;
    std::vector<std::size_t> conn;
    std::vector<std::size_t> cell_sizes;
    std::optional<CellType> type;
    std::vector<NamedField> vectors;
    std::vector<NamedCellScalars> scalars;
    std::size_t ncells = 0;
    bool have_points = false, have_cells = false, have_types = false;
    enum class Attr { None, Point, Cell } attr = Attr::None;

    while (!ts.done()) {
      const Token kw = ts.next("section keyword");
      if (kw.text == "POINTS") {
        const std::size_t n = ts.count("point count");
        expect_scalar_type(ts);
        points.resize(n);
        for (auto& x : points)
          for (int k = 0; k < 3; ++k) x[k] = ts.real("coordinate");
        have_points = true;
      } else if (kw.text == "CELLS") {
        ncells = ts.count("cell count");
        const std::size_t total = ts.count("cell list size");
        std::size_t consumed = 0;
        for (std::size_t c = 0; c < ncells; ++c) {
          const std::size_t line = ts.line();
          const std::size_t k = ts.count("cell vertex count");
          if (k != 4 && k != 8)
            throw ParseError("unsupported cell with " + std::to_string(k) + " vertices", line);
          cell_sizes.push_back(k);
          for (std::size_t a = 0; a < k; ++a) conn.push_back(ts.count("vertex index"));
          consumed += k + 1;
        }
        if (consumed != total)
          throw ParseError("CELLS size " + std::to_string(total) + " does not match contents",
                           kw.line);
        have_cells = true;
      } else if (kw.text == "CELL_TYPES") {
        const std::size_t n = ts.count("cell type count");
        if (n != ncells) throw ParseError("CELL_TYPES count differs from CELLS count", kw.line);
        for (std::size_t c = 0; c < n; ++c) {
          const std::size_t line = ts.line();
          const std::size_t id = ts.count("cell type");
          CellType t;
          if (id == 12) t = CellType::Hex8;
          else if (id == 10) t = CellType::Tet4;
          else throw ParseError("unknown cell type " + std::to_string(id), line);
          if (type && *type != t) throw ParseError("mixed cell types are not supported", line);
          if (cell_sizes.size() > c && cell_sizes[c] != nodes_per_cell(t))
            throw ParseError("cell vertex count does not match its type", line);
          type = t;
        }
        have_types = true;
      } else if (kw.text == "POINT_DATA") {
        if (ts.count("point data count") != points.size())
          throw ParseError("POINT_DATA count differs from POINTS count", kw.line);
        attr = Attr::Point;
      } else if (kw.text == "CELL_DATA") {
        if (ts.count("cell data count") != ncells)
          throw ParseError("CELL_DATA count differs from CELLS count", kw.line);
        attr = Attr::Cell;
      } else if (kw.text == "VECTORS") {
        if (attr != Attr::Point) throw ParseError("VECTORS outside POINT_DATA", kw.line);
        NamedField f{std::string(ts.next("field name").text), NodalField(points.size())};
        expect_scalar_type(ts);
        for (Eigen::Index i = 0; i < f.values.vec().size(); ++i) f.values.vec()[i] = ts.real("vector component");
        vectors.push_back(std::move(f));
      } else if (kw.text == "SCALARS") {
        if (attr != Attr::Cell) throw ParseError("SCALARS outside CELL_DATA", kw.line);
        NamedCellScalars f{std::string(ts.next("field name").text), std::vector<double>(ncells)};
        expect_scalar_type(ts);
        if (!ts.done() && ts.peek().text != "LOOKUP_TABLE") {
          if (ts.count("component count") != 1)
            throw ParseError("only single-component SCALARS are supported", kw.line);
        }
        ts.expect("LOOKUP_TABLE");
        ts.next("lookup table name");
        for (auto& v : f.values) v = ts.real("scalar value");
        scalars.push_back(std::move(f));
      } else {
        throw ParseError("unexpected keyword '" + std::string(kw.text) + "'", kw.line);
      }
    }
    if (!have_points) throw ParseError("missing POINTS section", ts.line());
    if (!have_cells || !have_types) throw ParseError("missing CELLS/CELL_TYPES section", ts.line());
    if (!type) throw ParseError("file has no cells", ts.line());

    MeshFile out{Mesh(std::move(points), *type, std::move(conn), std::move(dirichlet_nodes)),
                 std::move(vectors), std::move(scalars)};
    return out;
  } catch (const ParseError& e) {
    // Token lines are relative to the body; shift past the three header lines.
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (e.line() > 0 && colon != std::string::npos) msg = msg.substr(colon + 2);
    throw ParseError(msg, e.line() > 0 ? line_of(e.line()) : 0);
  } catch (const InvalidMesh& e) {
    throw ParseError(std::string("invalid mesh: ") + e.what(), 0);
  }
}

std::string write_vtk(const Mesh& mesh, const std::vector<NamedField>& point_vectors,
                      const std::vector<NamedCellScalars>& cell_scalars, std::string_view title) {
  std::string s;
  s.reserve(64 * mesh.node_count() + 32 * mesh.cell_count());
  s += "# vtk DataFile Version 3.0\n";
  s += title;
  s += "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  s += "POINTS " + std::to_string(mesh.node_count()) + " double\n";
  for (const auto& x : mesh.nodes())
    s += format_double(x[0]) + ' ' + format_double(x[1]) + ' ' + format_double(x[2]) + '\n';
  const std::size_t npe = nodes_per_cell(mesh.cell_type());
  s += "CELLS " + std::to_string(mesh.cell_count()) + ' ' +
       std::to_string(mesh.cell_count() * (npe + 1)) + '\n';
  for (std::size_t e = 0; e < mesh.cell_count(); ++e) {
    s += std::to_string(npe);
    for (std::size_t v : mesh.cell(e)) s += ' ' + std::to_string(v);
    s += '\n';
  }
  s += "CELL_TYPES " + std::to_string(mesh.cell_count()) + '\n';
  const std::string id = std::to_string(vtk_cell_id(mesh.cell_type())) + '\n';
  for (std::size_t e = 0; e < mesh.cell_count(); ++e) s += id;
  if (!cell_scalars.empty()) {
    s += "CELL_DATA " + std::to_string(mesh.cell_count()) + '\n';
    for (const auto& f : cell_scalars) {
      if (f.values.size() != mesh.cell_count())
        throw InvalidArgument("cell field '" + f.name + "' has wrong length");
      s += "SCALARS " + f.name + " double 1\nLOOKUP_TABLE default\n";
      for (double v : f.values) s += format_double(v) + '\n';
    }
  }
  if (!point_vectors.empty()) {
    s += "POINT_DATA " + std::to_string(mesh.node_count()) + '\n';
    for (const auto& f : point_vectors) {
      if (f.values.node_count() != mesh.node_count())
        throw InvalidArgument("point field '" + f.name + "' has wrong length");
      s += "VECTORS " + f.name + " double\n";
      for (std::size_t i = 0; i < mesh.node_count(); ++i) {
        const auto v = f.values.node(i);
        s += format_double(v[0]) + ' ' + format_double(v[1]) + ' ' + format_double(v[2]) + '\n';
      }
    }
  }
  return s;
}

std::filesystem::path dirichlet_sidecar_path(const std::filesystem::path& mesh_path) {
  auto p = mesh_path;
  p.replace_extension(".dirichlet.json");
  return p;
}

MeshFile load_mesh(const std::filesystem::path& path) {
  std::vector<std::size_t> dirichlet;
  const auto sidecar = dirichlet_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) dirichlet = load_dirichlet(sidecar);
  return parse_vtk(read_file(path), std::move(dirichlet));
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path,
               const std::vector<NamedField>& point_vectors,
               const std::vector<NamedCellScalars>& cell_scalars) {
  write_file(path, write_vtk(mesh, point_vectors, cell_scalars));
}

std::vector<std::size_t> load_dirichlet(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("Dirichlet sidecar: ") + e.what(), 0);
  }
  if (!j.is_object() || !j.contains("dirichlet_nodes") || !j["dirichlet_nodes"].is_array())
    throw ParseError("Dirichlet sidecar must be {\"dirichlet_nodes\": [...]}", 0);
  std::vector<std::size_t> out;
  for (const auto& v : j["dirichlet_nodes"]) {
    if (!v.is_number_unsigned()) throw ParseError("Dirichlet node ids must be non-negative integers", 0);
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

void save_dirichlet(const std::vector<std::size_t>& nodes, const std::filesystem::path& path) {
  nlohmann::json j;
  j["dirichlet_nodes"] = nodes;
  write_file(path, j.dump() + "\n");
}

std::vector<Vec3> parse_point_cloud(std::string_view text) {
  std::vector<Vec3> pts;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view l = text.substr(pos, end - pos);
    pos = end + 1;
    double v[3];
    int k = 0;
    std::size_t i = 0;
    while (i < l.size()) {
      while (i < l.size() && (l[i] == ' ' || l[i] == '\t' || l[i] == '\r')) ++i;
      if (i >= l.size()) break;
      std::size_t j = i;
      while (j < l.size() && l[j] != ' ' && l[j] != '\t' && l[j] != '\r') ++j;
      if (k == 3) throw ParseError("more than 3 values on a point line", line);
      auto [p, ec] = std::from_chars(l.data() + i, l.data() + j, v[k]);
      if (ec != std::errc() || p != l.data() + j || !std::isfinite(v[k]))
        throw ParseError("invalid coordinate '" + std::string(l.substr(i, j - i)) + "'", line);
      ++k;
      i = j;
    }
    if (k == 0) continue;
    if (k != 3) throw ParseError("expected 3 coordinates", line);
    pts.emplace_back(v[0], v[1], v[2]);
  }
  return pts;
}

std::string write_point_cloud(const std::vector<Vec3>& points) {
  std::string s;
  for (const auto& p : points)
    s += format_double(p[0]) + ' ' + format_double(p[1]) + ' ' + format_double(p[2]) + '\n';
  return s;
}

std::vector<Vec3> load_point_cloud(const std::filesystem::path& path) {
  return parse_point_cloud(read_file(path));
}

void save_point_cloud(const std::vector<Vec3>& points, const std::filesystem::path& path) {
  write_file(path, write_point_cloud(points));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place: '" + path.string() + "'");
  }
}

}  // namespace hyperreg
