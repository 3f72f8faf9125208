#include "gce/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <span>

#include "gce/errors.hpp"

namespace gce {

namespace {

void fill_uniform(std::span<double> out, std::mt19937_64& rng, double scale) {
  // Uniform on [-a, a] has standard deviation a / sqrt(3).
  std::uniform_real_distribution<double> dist(-scale * std::sqrt(3.0), scale * std::sqrt(3.0));
  for (double& x : out) x = dist(rng);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  // std::from_chars for double is available in GCC 11.
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_count(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isdigit(c);
  });
}

}  // namespace

WordVectors random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed,
                              double scale) {
  if (dim == 0) throw std::invalid_argument("embedding dim must be positive");
  WordVectors wv;
  wv.dim = dim;
  wv.values.resize(vocab.size() * dim);
  std::mt19937_64 rng(seed);
  fill_uniform(wv.values, rng, scale);
  return wv;
}

WordVectors parse_embeddings(std::string_view text, const Vocab& vocab, std::uint64_t seed) {
  std::size_t dim = 0;
  std::vector<std::vector<double>> rows(vocab.size());
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2 && is_count(fields[0]) && is_count(fields[1])) {
      continue;
    }
    const std::size_t d = fields.size() - 1;
    if (d == 0) throw DataError("embeddings line " + std::to_string(line_no) + ": no values");
    if (dim == 0) dim = d;
    if (d != dim) {
      throw DataError("embeddings line " + std::to_string(line_no) + ": " + std::to_string(d) +
                      " values, expected " + std::to_string(dim));
    }
    const std::size_t id = vocab.id(fields[0]);
    if (id == Vocab::kOov && fields[0] != Vocab::kOovToken) continue;
    std::vector<double> row(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_double(fields[i + 1], row[i])) {
        throw DataError("embeddings line " + std::to_string(line_no) + ": bad number '" +
                        std::string(fields[i + 1]) + "'");
      }
    }
    if (rows[id].empty()) rows[id] = std::move(row);
  }
  if (dim == 0) throw DataError("embeddings file contains no vectors");

  WordVectors wv;
  wv.dim = dim;
  wv.values.assign(vocab.size() * dim, 0.0);
  std::vector<double> mean(dim, 0.0);
  double sum_sq = 0.0;
  for (std::size_t id = 0; id < rows.size(); ++id) {
    if (rows[id].empty() || id == Vocab::kOov) continue;
    ++wv.matched;
    for (std::size_t i = 0; i < dim; ++i) {
      mean[i] += rows[id][i];
      sum_sq += rows[id][i] * rows[id][i];
    }
  }
  double scale = 0.5;
  if (wv.matched > 0) {
    for (double& m : mean) m /= static_cast<double>(wv.matched);
    scale = std::sqrt(sum_sq / static_cast<double>(wv.matched * dim));
  }
  std::mt19937_64 rng(seed);
  for (std::size_t id = 0; id < rows.size(); ++id) {
    std::span<double> dst(wv.values.data() + id * dim, dim);
    if (id == Vocab::kOov && wv.matched > 0) {
      std::copy(mean.begin(), mean.end(), dst.begin());
    } else if (!rows[id].empty() && id != Vocab::kOov) {
      std::copy(rows[id].begin(), rows[id].end(), dst.begin());
    } else {
      fill_uniform(dst, rng, scale);
    }
  }
  return wv;
}

WordVectors load_embeddings(const std::filesystem::path& path, const Vocab& vocab,
                            std::uint64_t seed) {
  return parse_embeddings(read_file(path), vocab, seed);
}

WordVectors concat_embeddings(const WordVectors& a, const WordVectors& b) {
  if (a.rows() != b.rows()) throw DataError("cannot concatenate embeddings of different vocab");
  WordVectors out;
  out.dim = a.dim + b.dim;
  out.matched = std::min(a.matched, b.matched);
  out.values.reserve(a.values.size() + b.values.size());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    out.values.insert(out.values.end(), a.values.begin() + r * a.dim,
                      a.values.begin() + (r + 1) * a.dim);
    out.values.insert(out.values.end(), b.values.begin() + r * b.dim,
                      b.values.begin() + (r + 1) * b.dim);
  }
  return out;
}

}  // namespace gce
