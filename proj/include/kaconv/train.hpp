#pragma once

// Training loop, evaluation, and spline-coefficient export. Everything is
// deterministic given (config, seed, data); wall-clock timings are the only
// run-to-run variation and live in dedicated manifest fields.

#include "kaconv/dataset.hpp"
#include "kaconv/manifest.hpp"
#include "kaconv/metrics.hpp"

namespace kaconv {

struct RunConfig {
  ModelSpec model;
  EmbedMode embed_mode = EmbedMode::random;
  std::string vectors_path;  // required for static / fine-tuned modes
  int epochs = 10;
  Index batch_size = 32;
  Scalar lr = 1e-3;
  Scalar weight_decay = 0.0;
  uint64_t seed = 42;
  Index max_len = 0;  // 0 = no truncation; otherwise padded cap >= min length
  std::string export_splines_dir;  // empty = no per-epoch export

  void validate() const;
};

struct RunManifest {
  RunConfig config;
  Index vocab_size = 0;
  std::vector<Scalar> epoch_train_loss;
  MetricsReport metrics;
  ParamReport params;
  double train_seconds = 0.0;  // wall clock, excluded from determinism
  double eval_seconds = 0.0;
};

struct TrainResult {
  TextModel model;
  Vocabulary vocab;
  RunManifest manifest;
};

// Builds the vocabulary from the training split only, trains for
// config.epochs epochs of shuffled mini-batches under cross-entropy, then
// evaluates on eval_set. A NaN loss aborts with the offending batch index.
TrainResult train(const RunConfig& config, const Dataset& train_set,
                  const Dataset& eval_set);

// Labels of `test` must all appear in `labels` (the training label set).
MetricsReport evaluate(const TextModel& model, const Vocabulary& vocab,
                       const std::vector<std::string>& labels,
                       const Dataset& test, Index batch_size = 32,
                       Index max_len = 0);

// CSV of every KAConv spline coefficient:
//   epoch,layer,out_channel,in_channel,tap,coeff_index,value
// Errors with unsupported-model when the trunk has no KAConv layers.
void export_splines(const TextModel& model, int epoch,
                    const std::string& out_path);
Index spline_export_row_count(const TextModel& model);

// Tokens of one batch, encoded and padded with PAD to the batch maximum
// (at least the model minimum; truncated to max_len when set).
std::vector<int32_t> encode_padded_batch(const Vocabulary& vocab,
                                         const Dataset& data, size_t begin,
                                         size_t end, Index min_len,
                                         Index max_len, Index* out_length);

}  // namespace kaconv
