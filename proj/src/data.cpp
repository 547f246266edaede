#include "isda/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "isda/numeric.hpp"

namespace isda {
namespace {

Dataset take_rows(const Dataset& source, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.meta = source.meta;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), source.inputs.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.inputs.row(static_cast<Eigen::Index>(r)) = source.inputs.row(rows[r]);
    out.labels(static_cast<Eigen::Index>(r)) = source.labels(rows[r]);
  }
  return out;
}

std::string format_double(Scalar value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  require(ec == std::errc(), "save_csv: unformattable value");
  return std::string(buf, ptr);
}

Scalar parse_double(std::string_view token, const std::string& path, std::size_t line) {
  Scalar value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(path + ":" + std::to_string(line) + ": not a number: '" +
                     std::string(token) + "'");
  }
  return value;
}

long long parse_label(std::string_view token, const std::string& path,
                      std::size_t line) {
  long long value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(path + ":" + std::to_string(line) +
                     ": label must be an integer: '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view row) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = row.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(row.substr(start));
      return fields;
    }
    fields.push_back(row.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

std::pair<Dataset, Dataset> generate_synthetic(const SyntheticSpec& spec,
                                               std::uint64_t seed) {
  require(spec.classes >= 2, "generate_synthetic: need at least two classes");
  require(spec.input_dim >= 1, "generate_synthetic: need positive input dim");
  require(static_cast<int>(spec.means.size()) == spec.classes,
          "generate_synthetic: one mean per class required");
  require(static_cast<int>(spec.covariances.size()) == spec.classes,
          "generate_synthetic: one covariance per class required");
  require(spec.train_per_class >= 1 && spec.test_per_class >= 0,
          "generate_synthetic: invalid per-class sample counts");
  for (int j = 0; j < spec.classes; ++j) {
    require(spec.means[j].size() == spec.input_dim &&
                spec.covariances[j].rows() == spec.input_dim &&
                spec.covariances[j].cols() == spec.input_dim,
            "generate_synthetic: mean/covariance dimension mismatch");
  }

  const auto build = [&](int per_class, std::uint64_t role) {
    Dataset d;
    d.meta = {spec.name, spec.classes, spec.input_dim, seed};
    d.inputs.resize(static_cast<Eigen::Index>(per_class) * spec.classes, spec.input_dim);
    d.labels.resize(d.inputs.rows());
    for (int j = 0; j < spec.classes; ++j) {
      const Matrix draws = mvn_sample(
          spec.means[j], spec.covariances[j], 1.0,
          derive_seed(seed, 2 * static_cast<std::uint64_t>(j) + role), per_class);
      d.inputs.middleRows(static_cast<Eigen::Index>(j) * per_class, per_class) = draws;
      d.labels.segment(static_cast<Eigen::Index>(j) * per_class, per_class)
          .setConstant(j);
    }
    return d;
  };
  return {build(spec.train_per_class, 0), build(spec.test_per_class, 1)};
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_csv: cannot open " + path);

  std::string header;
  if (!std::getline(in, header)) {
    throw ContractError("load_csv: empty file " + path);
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto header_fields = split_fields(header);
  require(header_fields.size() >= 2, "load_csv: header needs features and a label");
  const int dim = static_cast<int>(header_fields.size()) - 1;
  for (int c = 0; c < dim; ++c) {
    const std::string expected = "feature_" + std::to_string(c);
    if (header_fields[static_cast<std::size_t>(c)] != expected) {
      throw ParseError(path + ":1: expected header column '" + expected + "', got '" +
                       std::string(header_fields[static_cast<std::size_t>(c)]) + "'");
    }
  }
  if (header_fields.back() != "label") {
    throw ParseError(path + ":1: last header column must be 'label'");
  }

  std::vector<Scalar> values;
  std::vector<int> labels;
  std::string row;
  std::size_t line = 1;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    const auto fields = split_fields(row);
    if (fields.size() != header_fields.size()) {
      throw ParseError(path + ":" + std::to_string(line) + ": expected " +
                       std::to_string(header_fields.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    for (int c = 0; c < dim; ++c) {
      values.push_back(parse_double(fields[static_cast<std::size_t>(c)], path, line));
    }
    const long long label = parse_label(fields.back(), path, line);
    if (label < 0) {
      throw ParseError(path + ":" + std::to_string(line) + ": negative label");
    }
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty()) throw ContractError("load_csv: no data rows in " + path);

  Dataset d;
  d.meta.name = path;
  d.meta.input_dim = dim;
  d.meta.classes = *std::max_element(labels.begin(), labels.end()) + 1;
  d.inputs.resize(static_cast<Eigen::Index>(labels.size()), dim);
  d.labels.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int c = 0; c < dim; ++c) {
      d.inputs(static_cast<Eigen::Index>(i), c) =
          values[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(c)];
    }
    d.labels(static_cast<Eigen::Index>(i)) = labels[i];
  }
  return d;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  require(dataset.size() > 0, "save_csv: empty dataset");
  std::ofstream out(path);
  if (!out) throw ParseError("save_csv: cannot open " + path + " for writing");

  for (Eigen::Index c = 0; c < dataset.inputs.cols(); ++c) {
    out << "feature_" << c << ',';
  }
  out << "label\n";
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    for (Eigen::Index c = 0; c < dataset.inputs.cols(); ++c) {
      out << format_double(dataset.inputs(i, c)) << ',';
    }
    out << dataset.labels(i) << '\n';
  }
  require(out.good(), "save_csv: write failed for " + path);
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction,
                                  std::uint64_t seed) {
  require(validation_fraction > 0.0 && validation_fraction < 1.0,
          "split: fraction must be in (0, 1)");
  require(dataset.size() > 0, "split: empty dataset");

  const int classes = dataset.meta.classes;
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(classes));
  for (Eigen::Index i = 0; i < dataset.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.labels(i))].push_back(i);
  }

  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> val_rows;
  for (int j = 0; j < classes; ++j) {
    auto& rows = by_class[static_cast<std::size_t>(j)];
    const auto n = static_cast<long long>(rows.size());
    const auto take = std::llround(validation_fraction * static_cast<double>(n));
    if (take < 1 || take >= n) {
      throw ContractError("split: fraction leaves class " + std::to_string(j) +
                          " empty on one side");
    }
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    std::shuffle(rows.begin(), rows.end(), rng);
    val_rows.insert(val_rows.end(), rows.begin(), rows.begin() + take);
    train_rows.insert(train_rows.end(), rows.begin() + take, rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());
  return {take_rows(dataset, train_rows), take_rows(dataset, val_rows)};
}

}  // namespace isda
