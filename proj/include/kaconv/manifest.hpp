#pragma once

// Parameter serialization and model checkpoints.
//
// Parameter file (little-endian):
//   magic "KACVPAR1"
//   u32 record count
//   per record: u32 name length, name bytes, u32 ndim, u64 dims[ndim],
//               f64 values[prod(dims)]
// Records appear in the model's stable named-parameter order.
//
// A checkpoint directory holds VERSION, model.json (spec + embedding mode +
// labels + vocab size + seed), vocab.txt (corpus tokens in index order),
// and params.bin.

#include <string>
#include <tuple>

#include "kaconv/model.hpp"

namespace kaconv {

struct ParamRecord {
  std::string name;
  Shape shape;
  ArrayX values;
};

void save_params(const std::string& path, const NamedParams& params);
std::vector<ParamRecord> load_params(const std::string& path);
// Strict: every model parameter must be present with a matching shape.
void load_params_into(const std::string& path, const NamedParams& params);

inline constexpr const char* kCheckpointVersion = "kaconvtext-checkpoint 1";

void save_checkpoint(const std::string& dir, const TextModel& model,
                     const Vocabulary& vocab,
                     const std::vector<std::string>& labels, uint64_t seed);

struct LoadedCheckpoint {
  TextModel model;
  Vocabulary vocab;
  std::vector<std::string> labels;
  uint64_t seed = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace kaconv
