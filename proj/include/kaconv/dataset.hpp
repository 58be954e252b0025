#pragma once

// TSV dataset ingestion (label <TAB> pre-segmented text) and the seeded
// per-class 80:20 split.

#include <string>
#include <unordered_map>
#include <vector>

#include "kaconv/common.hpp"

namespace kaconv {

struct Record {
  std::string label;
  std::vector<std::string> tokens;
};

struct Dataset {
  std::vector<Record> records;
  std::vector<std::string> labels;  // stable order: first appearance
  std::unordered_map<std::string, int32_t> label_index;

  Index n_classes() const { return static_cast<Index>(labels.size()); }
  void register_label(const std::string& label);
};

// One record per line; CRLF accepted (CR stripped); duplicates kept.
// A missing tab or an empty label/text is a parse error naming the line.
Dataset load_dataset(const std::string& path);
Dataset parse_dataset_lines(const std::vector<std::string>& lines,
                            const std::string& source_name);

// Per class: floor(ratio * n_c) records to train, chosen by a seeded
// shuffle, remainder to test; output keeps original file order. Every
// class must have at least 2 records.
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset,
                                             Scalar ratio, uint64_t seed);

void save_dataset(const std::string& path, const Dataset& dataset);

}  // namespace kaconv
