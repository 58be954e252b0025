#pragma once

// The four text-classification architectures: a shared embed -> trunk ->
// pool -> dropout -> head skeleton where the trunk is three stacked Conv1d
// or KAConv1d layers (channel path d -> 64 -> 128 -> 256) and the head is
// linear or a KAN layer.

#include <optional>
#include <string>

#include "kaconv/embeddings.hpp"
#include "kaconv/layers.hpp"

namespace kaconv {

enum class ModelVariant { cnn, cnn_kan, kaconvtext_mlp, kaconvtext_kan };

ModelVariant parse_variant(const std::string& name);
const char* to_string(ModelVariant variant);
bool variant_has_kaconv_trunk(ModelVariant variant);
bool variant_has_kan_head(ModelVariant variant);

struct ModelSpec {
  ModelVariant variant = ModelVariant::cnn;
  Index embed_dim = 300;
  Index n_classes = 2;
  std::vector<Index> channels = {64, 128, 256};
  std::vector<Index> kernel_sizes = {3, 4, 5};
  Scalar dropout_p = 0.3;
  int grid_size = 5;
  int spline_order = 3;
  Scalar range_lo = -1.0;
  Scalar range_hi = 1.0;
  Scalar grid_eps = 0.02;
  KanScales scales;

  void validate() const;
  // Three stacked convolutions need sum(k_i - 1) positions plus a margin of
  // 3 so every layer's output stays non-empty.
  Index min_sequence_length() const;
};

struct ParamEntry {
  std::string name;
  Shape shape;
  Index count = 0;
  bool trainable = true;
};

struct ParamReport {
  std::vector<ParamEntry> entries;
  Index embedding = 0;  // trainable counts per component
  Index trunk = 0;
  Index head = 0;
  Index total = 0;  // total trainable
};

// Closed-form accounting from shapes alone; must agree exactly with the
// enumeration of a built model (tested).
ParamReport param_report(const ModelSpec& spec, Index vocab_size,
                         bool embedding_trainable);

class TextModel {
 public:
  TextModel(const ModelSpec& spec, EmbeddingTable embedding, uint64_t seed);

  // tokens holds batch*length indices, row-major. Sequences must already be
  // padded to length >= spec.min_sequence_length(). Returns [B x n_classes].
  Tensor forward(Tape* tape, const std::vector<int32_t>& tokens, Index batch,
                 Index length, bool train, Rng* dropout_rng) const;

  ParamReport count_params() const;
  NamedParams named_params() const;  // stable order, matches the manifest
  std::vector<Tensor> trainable_params() const;

  const ModelSpec& spec() const { return spec_; }
  const SplineGrid& grid() const { return grid_; }
  EmbeddingTable& embedding() { return embedding_; }
  const EmbeddingTable& embedding() const { return embedding_; }
  const std::vector<KAConv1dLayer>& kaconv_trunk() const {
    return kaconv_trunk_;
  }
  const std::vector<Conv1dLayer>& conv_trunk() const { return conv_trunk_; }
  bool has_kaconv_trunk() const { return !kaconv_trunk_.empty(); }

 private:
  ModelSpec spec_;
  EmbeddingTable embedding_;
  SplineGrid grid_;
  std::vector<Conv1dLayer> conv_trunk_;
  std::vector<KAConv1dLayer> kaconv_trunk_;
  std::optional<MLPHead> mlp_head_;
  std::optional<KANLayer> kan_head_;
};

TextModel build_model(const ModelSpec& spec, EmbeddingTable embedding,
                      uint64_t seed);
// Random-embedding convenience used by tests and parameter accounting.
TextModel build_model(const ModelSpec& spec, Index vocab_size, uint64_t seed);

}  // namespace kaconv
