#include "kaconv/model.hpp"

#include <numeric>

namespace kaconv {

ModelVariant parse_variant(const std::string& name) {
  if (name == "cnn") return ModelVariant::cnn;
  if (name == "cnn-kan") return ModelVariant::cnn_kan;
  if (name == "kaconvtext-mlp") return ModelVariant::kaconvtext_mlp;
  if (name == "kaconvtext-kan") return ModelVariant::kaconvtext_kan;
  fail(ErrorKind::invalid_argument,
       "unknown model variant '" + name +
           "' (expected cnn|cnn-kan|kaconvtext-mlp|kaconvtext-kan)");
}

const char* to_string(ModelVariant variant) {
  switch (variant) {
    case ModelVariant::cnn: return "cnn";
    case ModelVariant::cnn_kan: return "cnn-kan";
    case ModelVariant::kaconvtext_mlp: return "kaconvtext-mlp";
    case ModelVariant::kaconvtext_kan: return "kaconvtext-kan";
  }
  return "unknown";
}

bool variant_has_kaconv_trunk(ModelVariant variant) {
  return variant == ModelVariant::kaconvtext_mlp ||
         variant == ModelVariant::kaconvtext_kan;
}

bool variant_has_kan_head(ModelVariant variant) {
  return variant == ModelVariant::cnn_kan ||
         variant == ModelVariant::kaconvtext_kan;
}

void ModelSpec::validate() const {
  require(embed_dim >= 1, ErrorKind::invalid_argument,
          "embedding dimension must be positive");
  require(n_classes >= 2, ErrorKind::invalid_argument,
          "need at least two classes");
  require(!channels.empty() && channels.size() == kernel_sizes.size(),
          ErrorKind::invalid_argument,
          "channels and kernel_sizes must have equal, non-zero length");
  for (Index c : channels)
    require(c >= 1, ErrorKind::invalid_argument, "channel counts must be positive");
  for (Index k : kernel_sizes)
    require(k >= 1, ErrorKind::invalid_argument, "kernel sizes must be positive");
  require(dropout_p >= 0.0 && dropout_p < 1.0, ErrorKind::invalid_argument,
          "dropout must lie in [0, 1)");
  require(grid_size >= 1 && spline_order >= 0, ErrorKind::invalid_argument,
          "invalid spline grid hyperparameters");
  require(range_lo < range_hi, ErrorKind::invalid_argument,
          "grid range must satisfy lo < hi");
}

Index ModelSpec::min_sequence_length() const {
  Index shrink = 0;
  for (Index k : kernel_sizes) shrink += k - 1;
  return shrink + 3;
}

ParamReport param_report(const ModelSpec& spec, Index vocab_size,
                         bool embedding_trainable) {
  spec.validate();
  require(vocab_size >= 1, ErrorKind::invalid_argument,
          "vocabulary size must be positive");
  ParamReport report;
  auto push = [&report](std::string name, Shape shape, bool trainable) {
    ParamEntry entry{std::move(name), std::move(shape), 0, trainable};
    entry.count = shape_numel(entry.shape);
    report.entries.push_back(std::move(entry));
    return report.entries.back().count;
  };

  const Index embed_count = push("embedding.weight",
                                 {vocab_size, spec.embed_dim},
                                 embedding_trainable);
  if (embedding_trainable) report.embedding = embed_count;

  const Index n_b = spec.grid_size + spec.spline_order;
  Index c_in = spec.embed_dim;
  for (size_t layer = 0; layer < spec.channels.size(); ++layer) {
    const Index c_out = spec.channels[layer];
    const Index k = spec.kernel_sizes[layer];
    const std::string prefix = "trunk." + std::to_string(layer) + ".";
    if (variant_has_kaconv_trunk(spec.variant)) {
      report.trunk += push(prefix + "spline_weight", {c_out, c_in * n_b, k}, true);
      report.trunk += push(prefix + "base_weight", {c_out, c_in, k}, true);
      report.trunk += push(prefix + "prelu_slope", {1}, true);
    } else {
      report.trunk += push(prefix + "weight", {c_out, c_in, k}, true);
      report.trunk += push(prefix + "bias", {c_out}, true);
    }
    c_in = c_out;
  }

  const Index features = spec.channels.back();
  if (variant_has_kan_head(spec.variant)) {
    report.head += push("head.base_weight", {spec.n_classes, features}, true);
    report.head +=
        push("head.spline_weight", {spec.n_classes, features, n_b}, true);
    report.head += push("head.spline_scaler", {spec.n_classes, features}, true);
  } else {
    report.head += push("head.weight", {spec.n_classes, features}, true);
    report.head += push("head.bias", {spec.n_classes}, true);
  }
  report.total = report.embedding + report.trunk + report.head;
  return report;
}

TextModel::TextModel(const ModelSpec& spec, EmbeddingTable embedding,
                     uint64_t seed)
    : spec_(spec), embedding_(std::move(embedding)) {
  spec_.validate();
  require(embedding_.dim() == spec_.embed_dim, ErrorKind::invalid_argument,
          "embedding table dimension " + std::to_string(embedding_.dim()) +
              " does not match spec dimension " +
              std::to_string(spec_.embed_dim));
  grid_ = make_uniform_grid(spec_.grid_size, spec_.spline_order,
                            spec_.range_lo, spec_.range_hi, spec_.grid_eps);
  Rng rng = make_rng(seed, RngStream::init);
  Index c_in = spec_.embed_dim;
  for (size_t layer = 0; layer < spec_.channels.size(); ++layer) {
    const Index c_out = spec_.channels[layer];
    const Index k = spec_.kernel_sizes[layer];
    if (variant_has_kaconv_trunk(spec_.variant)) {
      kaconv_trunk_.push_back(
          make_kaconv1d(c_in, c_out, k, grid_, rng, spec_.scales));
    } else {
      conv_trunk_.push_back(make_conv1d(c_in, c_out, k, rng));
    }
    c_in = c_out;
  }
  const Index features = spec_.channels.back();
  if (variant_has_kan_head(spec_.variant)) {
    kan_head_ =
        make_kan_layer(features, spec_.n_classes, grid_, rng, spec_.scales);
  } else {
    mlp_head_ = make_mlp_head(features, spec_.n_classes, rng);
  }
}

Tensor TextModel::forward(Tape* tape, const std::vector<int32_t>& tokens,
                          Index batch, Index length, bool train,
                          Rng* dropout_rng) const {
  require(length >= spec_.min_sequence_length(), ErrorKind::invalid_state,
          "sequences must be padded to length >= " +
              std::to_string(spec_.min_sequence_length()) + ", got " +
              std::to_string(length));
  Tensor h = embedding_lookup(tape, embedding_.matrix, tokens, batch, length,
                              Vocabulary::kPad);
  if (has_kaconv_trunk()) {
    for (const KAConv1dLayer& layer : kaconv_trunk_)
      h = layer.forward(tape, h);
  } else {
    for (const Conv1dLayer& layer : conv_trunk_)
      h = relu(tape, layer.forward(tape, h));
  }
  h = adaptive_avg_pool_to_1(tape, h);
  if (train && spec_.dropout_p > 0.0) {
    require(dropout_rng != nullptr, ErrorKind::invalid_state,
            "training forward needs a dropout RNG");
    h = dropout(tape, h, spec_.dropout_p, true, *dropout_rng);
  }
  if (kan_head_.has_value()) return kan_head_->forward(tape, h);
  return mlp_head_->forward(tape, h);
}

NamedParams TextModel::named_params() const {
  NamedParams params;
  params.emplace_back("embedding.weight", embedding_.matrix);
  auto append = [&params](const std::string& prefix, NamedParams layer) {
    for (auto& [name, tensor] : layer)
      params.emplace_back(prefix + name, tensor);
  };
  for (size_t layer = 0; layer < spec_.channels.size(); ++layer) {
    const std::string prefix = "trunk." + std::to_string(layer) + ".";
    if (has_kaconv_trunk())
      append(prefix, kaconv_trunk_[layer].named_params());
    else
      append(prefix, conv_trunk_[layer].named_params());
  }
  if (kan_head_.has_value())
    append("head.", kan_head_->named_params());
  else
    append("head.", mlp_head_->named_params());
  return params;
}

std::vector<Tensor> TextModel::trainable_params() const {
  std::vector<Tensor> out;
  for (auto& [name, tensor] : named_params())
    if (tensor.requires_grad()) out.push_back(tensor);
  return out;
}

ParamReport TextModel::count_params() const {
  ParamReport report;
  for (const auto& [name, tensor] : named_params()) {
    ParamEntry entry{name, tensor.shape(), tensor.numel(),
                     tensor.requires_grad()};
    if (entry.trainable) {
      if (name.starts_with("embedding.")) report.embedding += entry.count;
      else if (name.starts_with("trunk.")) report.trunk += entry.count;
      else report.head += entry.count;
      report.total += entry.count;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

TextModel build_model(const ModelSpec& spec, EmbeddingTable embedding,
                      uint64_t seed) {
  return TextModel(spec, std::move(embedding), seed);
}

TextModel build_model(const ModelSpec& spec, Index vocab_size, uint64_t seed) {
  return TextModel(spec, init_random_embedding(vocab_size, spec.embed_dim, seed),
                   seed);
}

}  // namespace kaconv
