#include "kaconv/train.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace kaconv {

void RunConfig::validate() const {
  model.validate();
  require(epochs >= 0, ErrorKind::invalid_argument,
          "epochs must be non-negative");
  require(batch_size >= 1, ErrorKind::invalid_argument,
          "batch size must be positive");
  require(lr > 0.0, ErrorKind::invalid_argument,
          "learning rate must be positive");
  require(weight_decay >= 0.0, ErrorKind::invalid_argument,
          "weight decay must be non-negative");
  if (embed_mode == EmbedMode::random) {
    require(vectors_path.empty(), ErrorKind::invalid_argument,
            "random embeddings do not take a vector file");
  } else {
    require(!vectors_path.empty(), ErrorKind::invalid_argument,
            std::string(to_string(embed_mode)) +
                " embeddings need a vector file");
  }
}

std::vector<int32_t> encode_padded_batch(const Vocabulary& vocab,
                                         const Dataset& data, size_t begin,
                                         size_t end, Index min_len,
                                         Index max_len, Index* out_length) {
  Index length = min_len;
  for (size_t i = begin; i < end; ++i)
    length = std::max(length,
                      static_cast<Index>(data.records[i].tokens.size()));
  if (max_len > 0) length = std::min(length, std::max(max_len, min_len));
  *out_length = length;

  std::vector<int32_t> out(static_cast<size_t>(end - begin) *
                               static_cast<size_t>(length),
                           Vocabulary::kPad);
  for (size_t i = begin; i < end; ++i) {
    const std::vector<std::string>& tokens = data.records[i].tokens;
    const size_t n = std::min(tokens.size(), static_cast<size_t>(length));
    for (size_t t = 0; t < n; ++t)
      out[(i - begin) * static_cast<size_t>(length) + t] =
          vocab.encode(tokens[t]);
  }
  return out;
}

namespace {

std::vector<int32_t> label_indices(const Dataset& data,
                                   const std::vector<std::string>& labels,
                                   size_t begin, size_t end) {
  std::unordered_map<std::string, int32_t> index;
  for (size_t i = 0; i < labels.size(); ++i)
    index.emplace(labels[i], static_cast<int32_t>(i));
  std::vector<int32_t> out;
  out.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) {
    auto it = index.find(data.records[i].label);
    require(it != index.end(), ErrorKind::invalid_argument,
            "label '" + data.records[i].label +
                "' was never seen during training");
    out.push_back(it->second);
  }
  return out;
}

EmbeddingTable make_embedding(const RunConfig& config,
                              const Vocabulary& vocab) {
  switch (config.embed_mode) {
    case EmbedMode::random:
      return init_random_embedding(vocab, config.model.embed_dim, config.seed);
    case EmbedMode::static_pretrained:
    case EmbedMode::fine_tuned:
      return load_pretrained_embedding(config.vectors_path, vocab,
                                       config.model.embed_dim,
                                       config.embed_mode, config.seed);
  }
  fail(ErrorKind::invalid_argument, "unknown embedding mode");
}

}  // namespace

TrainResult train(const RunConfig& config, const Dataset& train_set,
                  const Dataset& eval_set) {
  config.validate();
  require(!train_set.records.empty() && !eval_set.records.empty(),
          ErrorKind::invalid_argument, "datasets must be non-empty");

  ModelSpec spec = config.model;
  spec.n_classes = train_set.n_classes();
  require(spec.n_classes >= 2, ErrorKind::invalid_argument,
          "training data must contain at least two classes");

  std::vector<std::string> lines;
  lines.reserve(train_set.records.size());
  for (const Record& record : train_set.records) {
    std::string line;
    for (size_t i = 0; i < record.tokens.size(); ++i) {
      if (i > 0) line += ' ';
      line += record.tokens[i];
    }
    lines.push_back(std::move(line));
  }
  Vocabulary vocab = Vocabulary::build(lines);

  TextModel model(spec, make_embedding(config, vocab), config.seed);
  Adam adam(model.trainable_params(),
            {.lr = config.lr, .weight_decay = config.weight_decay});
  Rng dropout_rng = make_rng(config.seed, RngStream::dropout);

  const Index min_len = spec.min_sequence_length();
  const size_t n_train = train_set.records.size();

  RunManifest manifest;
  manifest.config = config;
  manifest.config.model = spec;
  manifest.vocab_size = vocab.size();

  const auto train_start = std::chrono::steady_clock::now();
  Dataset epoch_view;
  epoch_view.labels = train_set.labels;
  epoch_view.label_index = train_set.label_index;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng =
        make_rng(config.seed, RngStream::shuffle, static_cast<uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    epoch_view.records.clear();
    for (size_t i : order) epoch_view.records.push_back(train_set.records[i]);

    Scalar loss_sum = 0.0;
    size_t batch_index = 0;
    for (size_t begin = 0; begin < n_train;
         begin += static_cast<size_t>(config.batch_size), ++batch_index) {
      const size_t end =
          std::min(n_train, begin + static_cast<size_t>(config.batch_size));
      const Index batch = static_cast<Index>(end - begin);
      Index length = 0;
      std::vector<int32_t> tokens = encode_padded_batch(
          vocab, epoch_view, begin, end, min_len, config.max_len, &length);
      std::vector<int32_t> labels =
          label_indices(epoch_view, train_set.labels, begin, end);
      try {
        Tape tape;
        Tensor logits =
            model.forward(&tape, tokens, batch, length, true, &dropout_rng);
        Tensor loss = softmax_cross_entropy(&tape, logits, labels);
        loss_sum += loss.item() * static_cast<Scalar>(batch);
        tape.backward(loss);
        adam.step();
      } catch (const Error& error) {
        if (error.kind() != ErrorKind::numeric_failure) throw;
        fail(ErrorKind::numeric_failure,
             std::string(error.what()) + " (epoch " + std::to_string(epoch) +
                 ", batch " + std::to_string(batch_index) + ")");
      }
    }
    manifest.epoch_train_loss.push_back(loss_sum /
                                        static_cast<Scalar>(n_train));
    if (!config.export_splines_dir.empty())
      export_splines(model, epoch,
                     config.export_splines_dir + "/splines_epoch" +
                         std::to_string(epoch) + ".csv");
  }
  manifest.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    train_start)
          .count();

  const auto eval_start = std::chrono::steady_clock::now();
  manifest.metrics = evaluate(model, vocab, train_set.labels, eval_set,
                              config.batch_size, config.max_len);
  manifest.eval_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    eval_start)
          .count();
  manifest.params = model.count_params();
  return TrainResult{std::move(model), std::move(vocab), std::move(manifest)};
}

MetricsReport evaluate(const TextModel& model, const Vocabulary& vocab,
                       const std::vector<std::string>& labels,
                       const Dataset& test, Index batch_size, Index max_len) {
  require(!test.records.empty(), ErrorKind::invalid_argument,
          "evaluation set is empty");
  const Index min_len = model.spec().min_sequence_length();
  std::vector<int32_t> truth =
      label_indices(test, labels, 0, test.records.size());
  std::vector<int32_t> predicted;
  predicted.reserve(test.records.size());
  for (size_t begin = 0; begin < test.records.size();
       begin += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(test.records.size(),
                                begin + static_cast<size_t>(batch_size));
    const Index batch = static_cast<Index>(end - begin);
    Index length = 0;
    std::vector<int32_t> tokens = encode_padded_batch(
        vocab, test, begin, end, min_len, max_len, &length);
    Tensor logits =
        model.forward(nullptr, tokens, batch, length, false, nullptr);
    const Index n_classes = logits.dim(1);
    for (Index b = 0; b < batch; ++b) {
      Index best = 0;
      for (Index c = 1; c < n_classes; ++c)
        if (logits.value()[b * n_classes + c] >
            logits.value()[b * n_classes + best])
          best = c;
      predicted.push_back(static_cast<int32_t>(best));
    }
  }
  return compute_metrics(truth, predicted, labels);
}

Index spline_export_row_count(const TextModel& model) {
  Index rows = 0;
  for (const KAConv1dLayer& layer : model.kaconv_trunk())
    rows += layer.spline_weight.numel();
  return rows;
}

void export_splines(const TextModel& model, int epoch,
                    const std::string& out_path) {
  require(model.has_kaconv_trunk(), ErrorKind::unsupported_model,
          "model '" + std::string(to_string(model.spec().variant)) +
              "' has no KAConv layers to export");
  std::ofstream out(out_path);
  require(out.good(), ErrorKind::io_error,
          "cannot write spline export '" + out_path + "'");
  out << "epoch,layer,out_channel,in_channel,tap,coeff_index,value\n";
  char buffer[64];
  const std::vector<KAConv1dLayer>& trunk = model.kaconv_trunk();
  for (size_t layer = 0; layer < trunk.size(); ++layer) {
    const KAConv1dLayer& l = trunk[layer];
    const Index n_b = l.grid.n_basis();
    const ArrayX& sw = l.spline_weight.value();
    for (Index co = 0; co < l.c_out; ++co)
      for (Index ci = 0; ci < l.c_in; ++ci)
        for (Index tap = 0; tap < l.kernel; ++tap)
          for (Index t = 0; t < n_b; ++t) {
            const Scalar value =
                sw[(co * l.c_in * n_b + ci * n_b + t) * l.kernel + tap];
            std::snprintf(buffer, sizeof(buffer), "%.17g", value);
            out << epoch << ',' << layer << ',' << co << ',' << ci << ','
                << tap << ',' << t << ',' << buffer << '\n';
          }
  }
  require(out.good(), ErrorKind::io_error,
          "write failure on spline export '" + out_path + "'");
}

}  // namespace kaconv
