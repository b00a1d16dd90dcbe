#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "transgcr/eval.hpp"
#include "transgcr/gcr.hpp"
#include "transgcr/graph.hpp"

namespace transgcr {

/// Malformed input file. what() reads "<path>:<line>: <message>"; line is 0
/// when the problem is not tied to one line.
class ParseError : public InvalidArgument {
 public:
  ParseError(const std::filesystem::path& path, std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class FeatureFormat {
  kDense,   // one comma-separated row per node
  kSparse,  // "i,j,value" lines, zeros implicit
};

/// Files making up one dataset and its declared shape. A bundle manifest is
/// a key=value file with keys edges, features, features_format (dense or
/// sparse), labels, mask (optional), n, d and classes. Relative paths are
/// resolved against the manifest's directory.
struct DatasetBundle {
  std::filesystem::path edges;
  std::filesystem::path features;
  FeatureFormat features_format = FeatureFormat::kDense;
  std::filesystem::path labels;
  std::optional<std::filesystem::path> mask;
  std::size_t n = 0;
  std::size_t d = 0;
  int classes = 2;
};

DatasetBundle read_bundle(const std::filesystem::path& manifest);
void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& manifest);

/// Nodes without a label line must be hidden by the mask; they get class 0
/// internally. Without a mask file every node must be labelled.
Dataset load_dataset(const DatasetBundle& bundle);

/// Writes <stem>.edges, <stem>.features, <stem>.labels, <stem>.mask and the
/// manifest <stem>.bundle into `dir`. Returns the bundle as written.
DatasetBundle save_dataset(const Dataset& data, const std::filesystem::path& dir,
                           const std::string& stem, FeatureFormat format = FeatureFormat::kDense);

/// "u<TAB>v" per line (any whitespace accepted); blank lines and lines
/// starting with '#' are skipped.
Graph load_edge_list(const std::filesystem::path& path, std::size_t n);
void save_edge_list(const Graph& g, const std::filesystem::path& path);

Matrix load_features(const std::filesystem::path& path, FeatureFormat format, std::size_t n,
                     std::size_t d);
void save_features(const Matrix& x, const std::filesystem::path& path, FeatureFormat format);

/// "node,class" lines, class 1-based on disk. Returns the labels and the set
/// of nodes that had a line.
std::pair<LabelMatrix, Mask> load_labels(const std::filesystem::path& path, std::size_t n,
                                         int classes);
void save_labels(const LabelMatrix& y, const std::filesystem::path& path);

/// One visible node id per line.
Mask load_mask(const std::filesystem::path& path, std::size_t n);
void save_mask(const Mask& mask, const std::filesystem::path& path);

/// "# d=<d> C=<C>", then "feature,class,value" and one row per nonzero entry
/// (feature 0-based, class 1-based).
void save_coefficients(const CoefficientMatrix& b, const std::filesystem::path& path);
CoefficientMatrix load_coefficients(const std::filesystem::path& path);

/// Header scenario_param,value,method,replicate,metric,metric_value. Rows are
/// ordered by (param, value, method, replicate, metric). Failed cells are
/// written with metric "error:<reason>" and value nan.
std::string format_table(const ExperimentTable& table);
void save_table(const ExperimentTable& table, const std::filesystem::path& path);

/// key=value lines; '#' starts a comment line. Duplicate keys are an error.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// 17 significant digits; parses back to the same double.
std::string format_double(double v);

/// Writes `contents` to `path`, throwing ComputationError on failure.
void write_text(const std::filesystem::path& path, const std::string& contents);

}  // namespace transgcr
