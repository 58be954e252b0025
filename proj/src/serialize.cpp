#include "kaconv/serialize.hpp"

namespace kaconv {

nlohmann::json spec_to_json(const ModelSpec& spec) {
  return nlohmann::json{{"variant", to_string(spec.variant)},
                        {"embed_dim", spec.embed_dim},
                        {"n_classes", spec.n_classes},
                        {"channels", spec.channels},
                        {"kernel_sizes", spec.kernel_sizes},
                        {"dropout_p", spec.dropout_p},
                        {"grid_size", spec.grid_size},
                        {"spline_order", spec.spline_order},
                        {"range_lo", spec.range_lo},
                        {"range_hi", spec.range_hi},
                        {"grid_eps", spec.grid_eps},
                        {"scale_noise", spec.scales.scale_noise},
                        {"scale_base", spec.scales.scale_base},
                        {"scale_spline", spec.scales.scale_spline}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.variant = parse_variant(j.at("variant").get<std::string>());
  spec.embed_dim = j.at("embed_dim").get<Index>();
  spec.n_classes = j.at("n_classes").get<Index>();
  spec.channels = j.at("channels").get<std::vector<Index>>();
  spec.kernel_sizes = j.at("kernel_sizes").get<std::vector<Index>>();
  spec.dropout_p = j.at("dropout_p").get<Scalar>();
  spec.grid_size = j.at("grid_size").get<int>();
  spec.spline_order = j.at("spline_order").get<int>();
  spec.range_lo = j.at("range_lo").get<Scalar>();
  spec.range_hi = j.at("range_hi").get<Scalar>();
  spec.grid_eps = j.at("grid_eps").get<Scalar>();
  spec.scales.scale_noise = j.at("scale_noise").get<Scalar>();
  spec.scales.scale_base = j.at("scale_base").get<Scalar>();
  spec.scales.scale_spline = j.at("scale_spline").get<Scalar>();
  spec.validate();
  return spec;
}

nlohmann::json run_config_to_json(const RunConfig& config) {
  nlohmann::json j = spec_to_json(config.model);
  j["embed_mode"] = to_string(config.embed_mode);
  j["vectors"] = config.vectors_path;
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["lr"] = config.lr;
  j["weight_decay"] = config.weight_decay;
  j["seed"] = config.seed;
  j["max_len"] = config.max_len;
  j["export_splines_dir"] = config.export_splines_dir;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig config;
  config.model = spec_from_json(j);
  config.embed_mode = parse_embed_mode(j.at("embed_mode").get<std::string>());
  config.vectors_path = j.at("vectors").get<std::string>();
  config.epochs = j.at("epochs").get<int>();
  config.batch_size = j.at("batch_size").get<Index>();
  config.lr = j.at("lr").get<Scalar>();
  config.weight_decay = j.at("weight_decay").get<Scalar>();
  config.seed = j.at("seed").get<uint64_t>();
  config.max_len = j.at("max_len").get<Index>();
  config.export_splines_dir = j.at("export_splines_dir").get<std::string>();
  return config;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json per_class = nlohmann::json::array();
  for (size_t c = 0; c < report.labels.size(); ++c) {
    per_class.push_back({{"label", report.labels[c]},
                         {"precision", report.precision[c]},
                         {"recall", report.recall[c]},
                         {"f1", report.f1[c]},
                         {"support", report.support[c]}});
  }
  return nlohmann::json{{"accuracy", report.accuracy},
                        {"weighted_f1", report.weighted_f1},
                        {"per_class", per_class},
                        {"confusion", report.confusion}};
}

nlohmann::json param_report_to_json(const ParamReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const ParamEntry& entry : report.entries) {
    entries.push_back({{"name", entry.name},
                       {"shape", entry.shape},
                       {"count", entry.count},
                       {"trainable", entry.trainable}});
  }
  return nlohmann::json{{"entries", entries},
                        {"embedding", report.embedding},
                        {"trunk", report.trunk},
                        {"head", report.head},
                        {"total", report.total}};
}

nlohmann::json manifest_to_json(const RunManifest& manifest) {
  return nlohmann::json{
      {"config", run_config_to_json(manifest.config)},
      {"vocab_size", manifest.vocab_size},
      {"epoch_train_loss", manifest.epoch_train_loss},
      {"metrics", metrics_to_json(manifest.metrics)},
      {"params", param_report_to_json(manifest.params)},
      {"timings",
       {{"train_seconds", manifest.train_seconds},
        {"eval_seconds", manifest.eval_seconds}}}};
}

}  // namespace kaconv
