#include "transgcr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>
#include <vector>

namespace transgcr {

namespace fs = std::filesystem;

ParseError::ParseError(const fs::path& path, std::size_t line, const std::string& message)
    : InvalidArgument(path.string() + ":" + std::to_string(line) + ": " + message), line_(line) {}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_whitespace(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

// Reads a file line by line, tracking line numbers for error messages.
class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw ParseError(path, 0, "cannot open file");
  }

  // Next line that is neither blank nor a '#' comment.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      line = t;
      return true;
    }
    return false;
  }

  // Next raw line, comments included.
  bool next_raw(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(path_, line_no_, message);
  }

  std::size_t line() const { return line_no_; }
  const fs::path& path() const { return path_; }

  std::size_t to_index(const std::string& text, const char* what) const {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
      fail(std::string("expected a non-negative integer ") + what + ", got '" + text + "'");
    return v;
  }

  double to_double(const std::string& text) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
      fail("expected a number, got '" + text + "'");
    if (!std::isfinite(v)) fail("value is not finite: '" + text + "'");
    return v;
  }

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

std::size_t parse_count(const std::map<std::string, std::string>& kv, const std::string& key,
                        const fs::path& manifest) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ParseError(manifest, 0, "missing key '" + key + "'");
  std::size_t v = 0;
  const std::string& t = it->second;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ParseError(manifest, 0, "key '" + key + "' is not a non-negative integer");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

void write_text(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ComputationError("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.close();
  if (!out) throw ComputationError("failed writing '" + path.string() + "'");
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  LineReader reader(path);
  std::map<std::string, std::string> kv;
  for (std::string line; reader.next(line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) reader.fail("expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) reader.fail("empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second) reader.fail("duplicate key '" + key + "'");
  }
  return kv;
}

// ---------------------------------------------------------------------------
// Bundles

DatasetBundle read_bundle(const fs::path& manifest) {
  const auto kv = read_key_values(manifest);
  static const std::set<std::string> known{"edges", "features", "features_format", "labels",
                                           "mask", "n", "d", "classes"};
  for (const auto& [key, value] : kv)
    if (!known.count(key)) throw ParseError(manifest, 0, "unknown key '" + key + "'");
  const fs::path base = manifest.parent_path();
  auto resolve = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end() || it->second.empty())
      throw ParseError(manifest, 0, "missing key '" + key + "'");
    const fs::path p(it->second);
    return p.is_absolute() ? p : base / p;
  };
  DatasetBundle b;
  b.edges = resolve("edges");
  b.features = resolve("features");
  b.labels = resolve("labels");
  if (kv.count("mask") && !kv.at("mask").empty()) b.mask = resolve("mask");
  if (const auto it = kv.find("features_format"); it != kv.end()) {
    if (it->second == "dense") b.features_format = FeatureFormat::kDense;
    else if (it->second == "sparse") b.features_format = FeatureFormat::kSparse;
    else throw ParseError(manifest, 0, "features_format must be dense or sparse");
  }
  b.n = parse_count(kv, "n", manifest);
  b.d = parse_count(kv, "d", manifest);
  b.classes = static_cast<int>(parse_count(kv, "classes", manifest));
  if (b.classes < 2) throw ParseError(manifest, 0, "classes must be at least 2");
  return b;
}

void write_bundle(const DatasetBundle& b, const fs::path& manifest) {
  const fs::path base = manifest.parent_path();
  auto rel = [&](const fs::path& p) {
    return base.empty() ? p.generic_string() : p.lexically_relative(base).generic_string();
  };
  std::ostringstream out;
  out << "edges=" << rel(b.edges) << "\n";
  out << "features=" << rel(b.features) << "\n";
  out << "features_format=" << (b.features_format == FeatureFormat::kDense ? "dense" : "sparse") << "\n";
  out << "labels=" << rel(b.labels) << "\n";
  if (b.mask) out << "mask=" << rel(*b.mask) << "\n";
  out << "n=" << b.n << "\nd=" << b.d << "\nclasses=" << b.classes << "\n";
  write_text(manifest, out.str());
}

Dataset load_dataset(const DatasetBundle& bundle) {
  Dataset out;
  out.graph = load_edge_list(bundle.edges, bundle.n);
  out.features = load_features(bundle.features, bundle.features_format, bundle.n, bundle.d);
  auto [labels, labelled] = load_labels(bundle.labels, bundle.n, bundle.classes);
  out.labels = std::move(labels);
  if (bundle.mask) {
    out.mask = load_mask(*bundle.mask, bundle.n);
    for (std::size_t i = 0; i < bundle.n; ++i)
      if (out.mask[i] && !labelled[i])
        throw ParseError(*bundle.mask, 0, "node " + std::to_string(i) + " is visible but has no label");
  } else {
    for (std::size_t i = 0; i < bundle.n; ++i)
      if (!labelled[i])
        throw ParseError(bundle.labels, 0, "node " + std::to_string(i) + " has no label");
    out.mask.assign(bundle.n, true);
  }
  return out;
}

DatasetBundle save_dataset(const Dataset& data, const fs::path& dir, const std::string& stem,
                           FeatureFormat format) {
  data.validate();
  DatasetBundle b;
  b.edges = dir / (stem + ".edges");
  b.features = dir / (stem + ".features");
  b.features_format = format;
  b.labels = dir / (stem + ".labels");
  b.mask = dir / (stem + ".mask");
  b.n = data.num_nodes();
  b.d = static_cast<std::size_t>(data.num_features());
  b.classes = data.num_classes();
  save_edge_list(data.graph, b.edges);
  save_features(data.features, b.features, format);
  save_labels(data.labels, b.labels);
  save_mask(data.mask, *b.mask);
  write_bundle(b, dir / (stem + ".bundle"));
  return b;
}

// ---------------------------------------------------------------------------
// Edge lists, features, labels, masks

Graph load_edge_list(const fs::path& path, std::size_t n) {
  LineReader reader(path);
  std::vector<Edge> edges;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::string line; reader.next(line);) {
    const auto fields = split_whitespace(line);
    if (fields.size() != 2) reader.fail("expected two node ids");
    const std::size_t u = reader.to_index(fields[0], "node id");
    const std::size_t v = reader.to_index(fields[1], "node id");
    if (u >= n || v >= n) reader.fail("node id out of range (n=" + std::to_string(n) + ")");
    if (u == v) reader.fail("self-loop on node " + std::to_string(u));
    if (!seen.emplace(std::min(u, v), std::max(u, v)).second)
      reader.fail("duplicate edge " + std::to_string(u) + "-" + std::to_string(v));
    edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
  }
  return Graph(n, std::move(edges));
}

void save_edge_list(const Graph& g, const fs::path& path) {
  std::ostringstream out;
  for (const Edge& e : g.edges()) out << e.u << '\t' << e.v << '\n';
  write_text(path, out.str());
}

Matrix load_features(const fs::path& path, FeatureFormat format, std::size_t n, std::size_t d) {
  LineReader reader(path);
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::string line;
  if (format == FeatureFormat::kDense) {
    std::size_t row = 0;
    while (reader.next(line)) {
      if (row >= n) reader.fail("more than n=" + std::to_string(n) + " feature rows");
      const auto fields = split_fields(line, ',');
      if (fields.size() != d)
        reader.fail("expected " + std::to_string(d) + " values, got " + std::to_string(fields.size()));
      for (std::size_t j = 0; j < d; ++j)
        x(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = reader.to_double(fields[j]);
      ++row;
    }
    if (row != n)
      throw ParseError(path, reader.line(),
                       "expected " + std::to_string(n) + " feature rows, got " + std::to_string(row));
    return x;
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (reader.next(line)) {
    const auto fields = split_fields(line, ',');
    if (fields.size() != 3) reader.fail("expected i,j,value");
    const std::size_t i = reader.to_index(fields[0], "row");
    const std::size_t j = reader.to_index(fields[1], "column");
    if (i >= n || j >= d) reader.fail("entry (" + fields[0] + "," + fields[1] + ") out of range");
    if (!seen.emplace(i, j).second) reader.fail("duplicate entry (" + fields[0] + "," + fields[1] + ")");
    x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = reader.to_double(fields[2]);
  }
  return x;
}

void save_features(const Matrix& x, const fs::path& path, FeatureFormat format) {
  std::ostringstream out;
  if (format == FeatureFormat::kDense) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j > 0) out << ',';
        out << format_double(x(i, j));
      }
      out << '\n';
    }
  } else {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (x(i, j) != 0.0) out << i << ',' << j << ',' << format_double(x(i, j)) << '\n';
  }
  write_text(path, out.str());
}

std::pair<LabelMatrix, Mask> load_labels(const fs::path& path, std::size_t n, int classes) {
  LineReader reader(path);
  std::vector<int> y(n, 0);
  Mask labelled(n, false);
  for (std::string line; reader.next(line);) {
    const auto fields = split_fields(line, ',');
    if (fields.size() != 2) reader.fail("expected node,class");
    const std::size_t i = reader.to_index(fields[0], "node id");
    const std::size_t c = reader.to_index(fields[1], "class");
    if (i >= n) reader.fail("node id out of range (n=" + std::to_string(n) + ")");
    if (c < 1 || c > static_cast<std::size_t>(classes))
      reader.fail("class " + fields[1] + " outside 1.." + std::to_string(classes));
    if (labelled[i]) reader.fail("node " + fields[0] + " labelled twice");
    labelled[i] = true;
    y[i] = static_cast<int>(c) - 1;
  }
  return {LabelMatrix(std::move(y), classes), std::move(labelled)};
}

void save_labels(const LabelMatrix& y, const fs::path& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < y.size(); ++i) out << i << ',' << y[i] + 1 << '\n';
  write_text(path, out.str());
}

Mask load_mask(const fs::path& path, std::size_t n) {
  LineReader reader(path);
  Mask mask(n, false);
  for (std::string line; reader.next(line);) {
    const std::size_t i = reader.to_index(line, "node id");
    if (i >= n) reader.fail("node id out of range (n=" + std::to_string(n) + ")");
    if (mask[i]) reader.fail("node " + line + " listed twice");
    mask[i] = true;
  }
  return mask;
}

void save_mask(const Mask& mask, const fs::path& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out << i << '\n';
  write_text(path, out.str());
}

// ---------------------------------------------------------------------------
// Coefficients

void save_coefficients(const CoefficientMatrix& b, const fs::path& path) {
  std::ostringstream out;
  out << "# d=" << b.num_features() << " C=" << b.num_classes() << "\n";
  out << "feature,class,value\n";
  const Matrix& v = b.values();
  for (Eigen::Index j = 0; j < v.rows(); ++j)
    for (Eigen::Index c = 0; c < v.cols(); ++c)
      if (v(j, c) != 0.0) out << j << ',' << c + 1 << ',' << format_double(v(j, c)) << '\n';
  write_text(path, out.str());
}

CoefficientMatrix load_coefficients(const fs::path& path) {
  LineReader reader(path);
  std::string line;
  if (!reader.next_raw(line)) reader.fail("empty file");
  std::size_t d = 0;
  int classes = 0;
  {
    const std::string t = trim(line);
    std::istringstream in(t);
    std::string hash, dpart, cpart, extra;
    in >> hash >> dpart >> cpart;
    if (hash != "#" || dpart.rfind("d=", 0) != 0 || cpart.rfind("C=", 0) != 0 || (in >> extra))
      reader.fail("expected shape line '# d=<d> C=<C>'");
    d = reader.to_index(dpart.substr(2), "d");
    classes = static_cast<int>(reader.to_index(cpart.substr(2), "C"));
    if (classes < 2) reader.fail("C must be at least 2");
  }
  if (!reader.next_raw(line) || trim(line) != "feature,class,value")
    reader.fail("expected header 'feature,class,value'");
  Matrix v = Matrix::Zero(static_cast<Eigen::Index>(d), classes - 1);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (reader.next(line)) {
    const auto fields = split_fields(line, ',');
    if (fields.size() != 3) reader.fail("expected feature,class,value");
    const std::size_t j = reader.to_index(fields[0], "feature");
    const std::size_t c = reader.to_index(fields[1], "class");
    if (j >= d) reader.fail("feature " + fields[0] + " outside shape d=" + std::to_string(d));
    if (c < 1 || c >= static_cast<std::size_t>(classes))
      reader.fail("class " + fields[1] + " outside 1.." + std::to_string(classes - 1));
    if (!seen.emplace(j, c).second) reader.fail("duplicate entry");
    v(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c - 1)) = reader.to_double(fields[2]);
  }
  return CoefficientMatrix(std::move(v), classes);
}

// ---------------------------------------------------------------------------
// Tables

std::string format_table(const ExperimentTable& table) {
  struct Row {
    std::string param;
    double value;
    std::string method;
    int replicate;
    std::string metric;
    double metric_value;
  };
  std::vector<Row> rows;
  for (const MetricRecord& r : table.records)
    rows.push_back({r.scenario_param, r.param_value, r.method, r.replicate, r.metric, r.value});
  for (const CellFailure& f : table.failures)
    rows.push_back({table.scenario_param, f.param_value, f.method, f.replicate, "error:" + f.reason,
                    std::nan("")});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.param, a.value, a.method, a.replicate, a.metric) <
           std::tie(b.param, b.value, b.method, b.replicate, b.metric);
  });
  std::ostringstream out;
  out << "scenario_param,value,method,replicate,metric,metric_value\n";
  for (const Row& r : rows)
    out << r.param << ',' << format_double(r.value) << ',' << r.method << ',' << r.replicate << ','
        << r.metric << ',' << (std::isnan(r.metric_value) ? "nan" : format_double(r.metric_value))
        << '\n';
  return out.str();
}

void save_table(const ExperimentTable& table, const fs::path& path) {
  write_text(path, format_table(table));
}

}  // namespace transgcr
