#pragma once

// Vocabulary construction and the three embedding modes: random (learned
// from scratch), static (pre-trained, frozen), fine-tuned (pre-trained,
// updated by backprop). Index 0 is PAD, index 1 is UNK; the PAD row stays
// zero in every mode.

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kaconv/rng.hpp"
#include "kaconv/tensor.hpp"

namespace kaconv {

enum class EmbedMode { random, static_pretrained, fine_tuned };

EmbedMode parse_embed_mode(const std::string& name);
const char* to_string(EmbedMode mode);

class Vocabulary {
 public:
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kUnk = 1;

  // Tokens from the given pre-segmented lines, ordered by descending
  // frequency then lexicographically (byte order). No frequency cutoff.
  static Vocabulary build(const std::vector<std::string>& lines);
  // Reconstruction from an ordered token list (checkpoint load).
  static Vocabulary from_ordered_tokens(std::vector<std::string> tokens);

  Index size() const { return static_cast<Index>(by_index_.size()) + 2; }
  int32_t encode(std::string_view token) const;  // UNK when absent
  const std::string& decode(int32_t index) const;
  std::vector<int32_t> encode_tokens(
      const std::vector<std::string>& tokens) const;
  // Corpus tokens in index order (index 2 first).
  const std::vector<std::string>& corpus_tokens() const { return by_index_; }

 private:
  std::unordered_map<std::string, int32_t> by_token_;
  std::vector<std::string> by_index_;
};

std::vector<std::string> split_tokens(std::string_view text);

struct EmbeddingTable {
  Tensor matrix;  // [V x d]; requires_grad iff trainable
  EmbedMode mode = EmbedMode::random;

  Index vocab_size() const { return matrix.dim(0); }
  Index dim() const { return matrix.dim(1); }
  bool trainable() const { return mode != EmbedMode::static_pretrained; }
};

// Rows ~ U(-0.5/d, 0.5/d); PAD row zero.
EmbeddingTable init_random_embedding(const Vocabulary& vocab, Index dim,
                                     uint64_t seed);
EmbeddingTable init_random_embedding(Index vocab_size, Index dim,
                                     uint64_t seed);

// Text vector format: header "count dim", then "token v1 ... vd" per line.
// Tokens in the file but not in the vocabulary are skipped; vocabulary
// tokens missing from the file (and UNK, unless a literal "<unk>" row is
// present) are drawn from N(0, 0.1^2); PAD stays zero. A duplicated token
// keeps its first row and emits a warning to `warnings` when given.
EmbeddingTable load_pretrained_embedding(const std::string& path,
                                         const Vocabulary& vocab,
                                         Index expected_dim, EmbedMode mode,
                                         uint64_t seed,
                                         std::ostream* warnings = nullptr);

// Writes every row (PAD and UNK included, as "<pad>" / "<unk>") in the text
// vector format with round-trip-exact doubles.
void save_vec_file(const std::string& path, const Vocabulary& vocab,
                   const Tensor& matrix);

}  // namespace kaconv
