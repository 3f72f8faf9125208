#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "gce/corpus.hpp"

namespace gce {

// Row-major [vocab x dim] word vectors aligned with a Vocab.
struct WordVectors {
  std::size_t dim = 0;
  std::vector<double> values;
  std::size_t matched = 0;  // vocab tokens found in the source file

  std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
};

// Seeded uniform rows with per-component standard deviation `scale`.
WordVectors random_embeddings(const Vocab& vocab, std::size_t dim, std::uint64_t seed,
                              double scale = 0.5);

// Text format: one "token v1 ... vd" line per token, with an optional
// leading "<count> <dim>" header. Vocab tokens missing from the file get
// seeded random rows scaled like the loaded ones; the OOV row is the mean of
// the loaded rows.
WordVectors parse_embeddings(std::string_view text, const Vocab& vocab, std::uint64_t seed);
WordVectors load_embeddings(const std::filesystem::path& path, const Vocab& vocab,
                            std::uint64_t seed);

// Per-token concatenation [a ; b], e.g. word vectors with subword vectors.
WordVectors concat_embeddings(const WordVectors& a, const WordVectors& b);

}  // namespace gce
