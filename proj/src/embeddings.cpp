#include "kaconv/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace kaconv {

EmbedMode parse_embed_mode(const std::string& name) {
  if (name == "random") return EmbedMode::random;
  if (name == "static") return EmbedMode::static_pretrained;
  if (name == "finetuned") return EmbedMode::fine_tuned;
  fail(ErrorKind::invalid_argument,
       "unknown embedding mode '" + name +
           "' (expected random|static|finetuned)");
}

const char* to_string(EmbedMode mode) {
  switch (mode) {
    case EmbedMode::random: return "random";
    case EmbedMode::static_pretrained: return "static";
    case EmbedMode::fine_tuned: return "finetuned";
  }
  return "unknown";
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    size_t end = pos;
    while (end < text.size() && text[end] != ' ') ++end;
    if (end > pos) tokens.emplace_back(text.substr(pos, end - pos));
    pos = end;
  }
  return tokens;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& lines) {
  require(!lines.empty(), ErrorKind::invalid_argument,
          "cannot build a vocabulary from an empty corpus");
  std::unordered_map<std::string, int64_t> counts;
  for (const std::string& line : lines)
    for (std::string& token : split_tokens(line)) ++counts[std::move(token)];
  require(!counts.empty(), ErrorKind::invalid_argument,
          "corpus contains no tokens");

  std::vector<std::pair<std::string, int64_t>> ordered(counts.begin(),
                                                       counts.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens;
  tokens.reserve(ordered.size());
  for (auto& [token, count] : ordered) tokens.push_back(std::move(token));
  return from_ordered_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_ordered_tokens(std::vector<std::string> tokens) {
  Vocabulary vocab;
  vocab.by_index_ = std::move(tokens);
  vocab.by_token_.reserve(vocab.by_index_.size());
  for (size_t i = 0; i < vocab.by_index_.size(); ++i)
    vocab.by_token_.emplace(vocab.by_index_[i], static_cast<int32_t>(i) + 2);
  return vocab;
}

int32_t Vocabulary::encode(std::string_view token) const {
  auto it = by_token_.find(std::string(token));
  return it == by_token_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::decode(int32_t index) const {
  static const std::string pad = "<pad>";
  static const std::string unk = "<unk>";
  if (index == kPad) return pad;
  if (index == kUnk) return unk;
  require(index >= 2 && index < size(), ErrorKind::invalid_argument,
          "vocabulary index " + std::to_string(index) + " out of range");
  return by_index_[static_cast<size_t>(index) - 2];
}

std::vector<int32_t> Vocabulary::encode_tokens(
    const std::vector<std::string>& tokens) const {
  std::vector<int32_t> out;
  out.reserve(tokens.size());
  for (const std::string& token : tokens) out.push_back(encode(token));
  return out;
}

EmbeddingTable init_random_embedding(const Vocabulary& vocab, Index dim,
                                     uint64_t seed) {
  return init_random_embedding(vocab.size(), dim, seed);
}

EmbeddingTable init_random_embedding(Index vocab_size, Index dim,
                                     uint64_t seed) {
  require(dim >= 1, ErrorKind::invalid_argument,
          "embedding dimension must be positive");
  require(vocab_size >= 1, ErrorKind::invalid_argument,
          "vocabulary size must be positive");
  EmbeddingTable table;
  table.mode = EmbedMode::random;
  table.matrix = Tensor::zeros({vocab_size, dim}, /*requires_grad=*/true);
  Rng rng = make_rng(seed, RngStream::embed);
  ArrayX& m = table.matrix.value();
  const Scalar bound = 0.5 / static_cast<Scalar>(dim);
  // PAD row (index 0) stays zero.
  for (Index row = 1; row < vocab_size; ++row)
    for (Index c = 0; c < dim; ++c)
      m[row * dim + c] = rng.uniform(-bound, bound);
  return table;
}

namespace {

Scalar parse_double(std::string_view text, size_t line_no) {
  Scalar value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  require(ec == std::errc() && ptr == end, ErrorKind::parse_error,
          "vector file line " + std::to_string(line_no) +
              ": malformed number '" + std::string(text) + "'");
  return value;
}

}  // namespace

EmbeddingTable load_pretrained_embedding(const std::string& path,
                                         const Vocabulary& vocab,
                                         Index expected_dim, EmbedMode mode,
                                         uint64_t seed,
                                         std::ostream* warnings) {
  require(mode != EmbedMode::random, ErrorKind::invalid_argument,
          "random mode does not load pre-trained vectors");
  std::ifstream in(path);
  require(in.good(), ErrorKind::io_error,
          "cannot open vector file '" + path + "'");

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::parse_error,
          "vector file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream header(line);
  int64_t count = 0, dim = 0;
  require(static_cast<bool>(header >> count >> dim), ErrorKind::parse_error,
          "vector file line 1: expected header 'count dim'");
  require(dim == expected_dim, ErrorKind::invalid_argument,
          "vector file dimension " + std::to_string(dim) +
              " does not match configured dimension " +
              std::to_string(expected_dim));

  EmbeddingTable table;
  table.mode = mode;
  table.matrix = Tensor::zeros({vocab.size(), expected_dim},
                               /*requires_grad=*/mode != EmbedMode::static_pretrained);
  ArrayX& m = table.matrix.value();

  std::vector<bool> filled(static_cast<size_t>(vocab.size()), false);
  filled[Vocabulary::kPad] = true;  // PAD stays zero
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_tokens(line);
    require(static_cast<Index>(fields.size()) == expected_dim + 1,
            ErrorKind::parse_error,
            "vector file line " + std::to_string(line_no) + ": expected " +
                std::to_string(expected_dim + 1) + " fields, got " +
                std::to_string(fields.size()));
    const std::string& token = fields[0];
    int32_t index;
    if (token == "<unk>") {
      index = Vocabulary::kUnk;
    } else if (token == "<pad>") {
      continue;  // PAD is pinned to zero
    } else {
      index = vocab.encode(token);
      if (index == Vocabulary::kUnk) continue;  // not in vocabulary
    }
    if (filled[static_cast<size_t>(index)]) {
      if (warnings != nullptr)
        *warnings << "warning: duplicate vector for token '" << token
                  << "' at line " << line_no << ", keeping first\n";
      continue;
    }
    for (Index c = 0; c < expected_dim; ++c)
      m[index * expected_dim + c] = parse_double(fields[c + 1], line_no);
    filled[static_cast<size_t>(index)] = true;
  }

  // Missing rows (UNK first by index order) from N(0, 0.1^2), seeded.
  Rng rng = make_rng(seed, RngStream::embed);
  for (Index row = 1; row < vocab.size(); ++row) {
    if (filled[static_cast<size_t>(row)]) continue;
    for (Index c = 0; c < expected_dim; ++c)
      m[row * expected_dim + c] = rng.normal(0.0, 0.1);
  }
  return table;
}

void save_vec_file(const std::string& path, const Vocabulary& vocab,
                   const Tensor& matrix) {
  require(matrix.ndim() == 2 && matrix.dim(0) == vocab.size(),
          ErrorKind::invalid_argument,
          "embedding matrix does not match vocabulary size");
  std::ofstream out(path);
  require(out.good(), ErrorKind::io_error,
          "cannot write vector file '" + path + "'");
  const Index dim = matrix.dim(1);
  out << vocab.size() << " " << dim << "\n";
  char buffer[64];
  for (Index row = 0; row < vocab.size(); ++row) {
    out << vocab.decode(static_cast<int32_t>(row));
    for (Index c = 0; c < dim; ++c) {
      std::snprintf(buffer, sizeof(buffer), "%.17g",
                    matrix.value()[row * dim + c]);
      out << ' ' << buffer;
    }
    out << '\n';
  }
  require(out.good(), ErrorKind::io_error,
          "write failure on vector file '" + path + "'");
}

}  // namespace kaconv
