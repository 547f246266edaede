#include "isda/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <nlohmann/json.hpp>

namespace isda {
namespace {

using nlohmann::ordered_json;

void put_f64(std::string& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

double take_f64(const std::string& in, std::size_t& offset) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + b]))
            << (8 * b);
  }
  offset += 8;
  return std::bit_cast<double>(bits);
}

void put_matrix(std::string& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  }
}

void put_vector(std::string& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
}

Matrix take_matrix(const std::string& in, std::size_t& offset, Eigen::Index rows,
                   Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = take_f64(in, offset);
  }
  return m;
}

Vector take_vector(const std::string& in, std::size_t& offset, Eigen::Index size) {
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = take_f64(in, offset);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const int classes = checkpoint.head.classes();
  const Eigen::Index feat_dim = checkpoint.head.feature_dim();
  require(static_cast<int>(checkpoint.stats.size()) == classes,
          "save_checkpoint: one statistics entry per class required");

  std::string payload;
  for (std::size_t l = 0; l < checkpoint.net.layer_count(); ++l) {
    put_matrix(payload, checkpoint.net.weights[l]);
    put_vector(payload, checkpoint.net.biases[l]);
  }
  put_matrix(payload, checkpoint.head.weights);
  put_vector(payload, checkpoint.head.bias);
  std::vector<long long> counts;
  for (const auto& s : checkpoint.stats) {
    counts.push_back(s.count);
    put_vector(payload, s.mean);
    put_matrix(payload, s.cov);
  }

  ordered_json header;
  header["format_version"] = checkpoint.format_version;
  header["config_hash"] = checkpoint.config_hash;
  header["step"] = checkpoint.step;
  header["layer_sizes"] = checkpoint.net.sizes;
  header["classes"] = classes;
  header["feature_dim"] = feat_dim;
  header["class_counts"] = counts;
  header["payload_doubles"] = payload.size() / 8;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("save_checkpoint: cannot open " + path);
  out << header.dump() << '\n' << payload;
  require(out.good(), "save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("load_checkpoint: cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw ParseError("load_checkpoint: missing header in " + path);
  }
  ordered_json header;
  try {
    header = ordered_json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_checkpoint: bad header in " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.format_version = header.at("format_version").get<int>();
    if (ckpt.format_version != 1) {
      throw ParseError("load_checkpoint: unsupported format version");
    }
    ckpt.config_hash = header.at("config_hash").get<std::uint64_t>();
    ckpt.step = header.at("step").get<long long>();
    ckpt.net.sizes = header.at("layer_sizes").get<std::vector<int>>();
    const int classes = header.at("classes").get<int>();
    const auto feat_dim = header.at("feature_dim").get<Eigen::Index>();
    const auto counts = header.at("class_counts").get<std::vector<long long>>();
    const auto payload_doubles = header.at("payload_doubles").get<std::size_t>();

    std::string payload((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    if (payload.size() != payload_doubles * 8) {
      throw ParseError("load_checkpoint: payload size mismatch in " + path);
    }

    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < ckpt.net.sizes.size(); ++l) {
      ckpt.net.weights.push_back(
          take_matrix(payload, offset, ckpt.net.sizes[l + 1], ckpt.net.sizes[l]));
      ckpt.net.biases.push_back(take_vector(payload, offset, ckpt.net.sizes[l + 1]));
    }
    ckpt.head.weights = take_matrix(payload, offset, classes, feat_dim);
    ckpt.head.bias = take_vector(payload, offset, classes);
    if (static_cast<int>(counts.size()) != classes) {
      throw ParseError("load_checkpoint: class count list mismatch in " + path);
    }
    for (int j = 0; j < classes; ++j) {
      ClassStatistics s;
      s.class_id = j;
      s.count = counts[static_cast<std::size_t>(j)];
      s.mean = take_vector(payload, offset, feat_dim);
      s.cov = take_matrix(payload, offset, feat_dim, feat_dim);
      ckpt.stats.push_back(std::move(s));
    }
    if (offset != payload.size()) {
      throw ParseError("load_checkpoint: trailing payload bytes in " + path);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("load_checkpoint: bad header field in " + path + ": " + e.what());
  }
  return ckpt;
}

}  // namespace isda
