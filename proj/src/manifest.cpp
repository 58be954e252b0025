#include "kaconv/manifest.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "kaconv/serialize.hpp"

namespace kaconv {

namespace {

constexpr char kMagic[8] = {'K', 'A', 'C', 'V', 'P', 'A', 'R', '1'};

template <class T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_raw(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  require(in.good(), ErrorKind::parse_error,
          "truncated parameter file '" + path + "'");
  return value;
}

}  // namespace

void save_params(const std::string& path, const NamedParams& params) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::io_error,
          "cannot write parameter file '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, static_cast<uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    write_raw(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw(out, static_cast<uint32_t>(tensor.shape().size()));
    for (Index dim : tensor.shape())
      write_raw(out, static_cast<uint64_t>(dim));
    out.write(reinterpret_cast<const char*>(tensor.value().data()),
              static_cast<std::streamsize>(tensor.numel() *
                                           sizeof(Scalar)));
  }
  require(out.good(), ErrorKind::io_error,
          "write failure on parameter file '" + path + "'");
}

std::vector<ParamRecord> load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::io_error,
          "cannot open parameter file '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          ErrorKind::parse_error,
          "'" + path + "' is not a parameter file (bad magic)");
  const auto count = read_raw<uint32_t>(in, path);
  std::vector<ParamRecord> records;
  records.reserve(count);
  for (uint32_t r = 0; r < count; ++r) {
    ParamRecord record;
    const auto name_len = read_raw<uint32_t>(in, path);
    record.name.resize(name_len);
    in.read(record.name.data(), name_len);
    const auto ndim = read_raw<uint32_t>(in, path);
    record.shape.resize(ndim);
    for (uint32_t d = 0; d < ndim; ++d)
      record.shape[d] = static_cast<Index>(read_raw<uint64_t>(in, path));
    const Index numel = shape_numel(record.shape);
    record.values.resize(numel);
    in.read(reinterpret_cast<char*>(record.values.data()),
            static_cast<std::streamsize>(numel * sizeof(Scalar)));
    require(in.good(), ErrorKind::parse_error,
            "truncated parameter file '" + path + "'");
    records.push_back(std::move(record));
  }
  return records;
}

void load_params_into(const std::string& path, const NamedParams& params) {
  std::vector<ParamRecord> records = load_params(path);
  require(records.size() == params.size(), ErrorKind::invalid_argument,
          "parameter file '" + path + "' has " +
              std::to_string(records.size()) + " records, model expects " +
              std::to_string(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = params[i];
    require(records[i].name == name, ErrorKind::invalid_argument,
            "parameter record '" + records[i].name + "' where '" + name +
                "' was expected");
    require(records[i].shape == tensor.shape(), ErrorKind::invalid_argument,
            "parameter '" + name + "' has shape " +
                shape_str(records[i].shape) + ", model expects " +
                shape_str(tensor.shape()));
    const_cast<Tensor&>(tensor).value() = std::move(records[i].values);
  }
}

void save_checkpoint(const std::string& dir, const TextModel& model,
                     const Vocabulary& vocab,
                     const std::vector<std::string>& labels, uint64_t seed) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::io_error, "cannot create directory '" + dir + "'");

  {
    std::ofstream out(fs::path(dir) / "VERSION");
    out << kCheckpointVersion << "\n";
    require(out.good(), ErrorKind::io_error, "cannot write VERSION");
  }
  {
    nlohmann::json j = spec_to_json(model.spec());
    j["embed_mode"] = to_string(model.embedding().mode);
    j["labels"] = labels;
    j["vocab_size"] = vocab.size();
    j["seed"] = seed;
    std::ofstream out(fs::path(dir) / "model.json");
    out << j.dump(2) << "\n";
    require(out.good(), ErrorKind::io_error, "cannot write model.json");
  }
  {
    std::ofstream out(fs::path(dir) / "vocab.txt");
    for (const std::string& token : vocab.corpus_tokens()) out << token << "\n";
    require(out.good(), ErrorKind::io_error, "cannot write vocab.txt");
  }
  save_params((fs::path(dir) / "params.bin").string(), model.named_params());
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  {
    std::ifstream in(fs::path(dir) / "VERSION");
    std::string version;
    std::getline(in, version);
    require(in.good() && version == kCheckpointVersion, ErrorKind::parse_error,
            "unsupported checkpoint version in '" + dir + "'");
  }
  nlohmann::json j;
  {
    std::ifstream in(fs::path(dir) / "model.json");
    require(in.good(), ErrorKind::io_error,
            "cannot open '" + dir + "/model.json'");
    in >> j;
  }
  const ModelSpec spec = spec_from_json(j);
  const EmbedMode mode = parse_embed_mode(j.at("embed_mode").get<std::string>());
  const auto labels = j.at("labels").get<std::vector<std::string>>();
  const Index vocab_size = j.at("vocab_size").get<Index>();
  const uint64_t seed = j.at("seed").get<uint64_t>();

  std::vector<std::string> tokens;
  {
    std::ifstream in(fs::path(dir) / "vocab.txt");
    require(in.good(), ErrorKind::io_error,
            "cannot open '" + dir + "/vocab.txt'");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
  }
  Vocabulary vocab = Vocabulary::from_ordered_tokens(std::move(tokens));
  require(vocab.size() == vocab_size, ErrorKind::parse_error,
          "vocab.txt does not match the recorded vocabulary size");

  EmbeddingTable table;
  table.mode = mode;
  table.matrix = Tensor::zeros({vocab_size, spec.embed_dim},
                               /*requires_grad=*/mode != EmbedMode::static_pretrained);
  TextModel model(spec, std::move(table), seed);
  load_params_into((fs::path(dir) / "params.bin").string(),
                   model.named_params());
  return LoadedCheckpoint{std::move(model), std::move(vocab), labels, seed};
}

}  // namespace kaconv
