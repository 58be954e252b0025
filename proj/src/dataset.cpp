#include "kaconv/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "kaconv/embeddings.hpp"
#include "kaconv/rng.hpp"

namespace kaconv {

void Dataset::register_label(const std::string& label) {
  if (label_index.emplace(label, static_cast<int32_t>(labels.size())).second)
    labels.push_back(label);
}

Dataset parse_dataset_lines(const std::vector<std::string>& lines,
                            const std::string& source_name) {
  Dataset dataset;
  size_t line_no = 0;
  for (std::string line : lines) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    require(tab != std::string::npos, ErrorKind::parse_error,
            source_name + " line " + std::to_string(line_no) +
                ": missing tab separator");
    Record record;
    record.label = line.substr(0, tab);
    require(!record.label.empty(), ErrorKind::parse_error,
            source_name + " line " + std::to_string(line_no) +
                ": empty label");
    record.tokens = split_tokens(std::string_view(line).substr(tab + 1));
    require(!record.tokens.empty(), ErrorKind::parse_error,
            source_name + " line " + std::to_string(line_no) +
                ": empty text");
    dataset.register_label(record.label);
    dataset.records.push_back(std::move(record));
  }
  require(!dataset.records.empty(), ErrorKind::invalid_argument,
          source_name + ": no records");
  return dataset;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::io_error,
          "cannot open dataset '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  return parse_dataset_lines(lines, path);
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset,
                                             Scalar ratio, uint64_t seed) {
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::invalid_argument,
          "split ratio must lie in (0, 1)");
  std::vector<std::vector<size_t>> by_class(dataset.labels.size());
  for (size_t i = 0; i < dataset.records.size(); ++i)
    by_class[static_cast<size_t>(
                 dataset.label_index.at(dataset.records[i].label))]
        .push_back(i);
  for (size_t c = 0; c < by_class.size(); ++c)
    require(by_class[c].size() >= 2, ErrorKind::invalid_argument,
            "class '" + dataset.labels[c] + "' has fewer than 2 records");

  std::vector<bool> to_train(dataset.records.size(), false);
  for (size_t c = 0; c < by_class.size(); ++c) {
    std::vector<size_t> indices = by_class[c];
    Rng rng = make_rng(seed, RngStream::split, c);
    rng.shuffle(indices);
    const size_t n_train = static_cast<size_t>(
        std::floor(ratio * static_cast<Scalar>(indices.size())));
    for (size_t i = 0; i < n_train; ++i) to_train[indices[i]] = true;
  }

  Dataset train, test;
  train.labels = test.labels = dataset.labels;
  train.label_index = test.label_index = dataset.label_index;
  for (size_t i = 0; i < dataset.records.size(); ++i)
    (to_train[i] ? train : test).records.push_back(dataset.records[i]);
  return {std::move(train), std::move(test)};
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::io_error,
          "cannot write dataset '" + path + "'");
  for (const Record& record : dataset.records) {
    out << record.label << '\t';
    for (size_t i = 0; i < record.tokens.size(); ++i) {
      if (i > 0) out << ' ';
      out << record.tokens[i];
    }
    out << '\n';
  }
  require(out.good(), ErrorKind::io_error,
          "write failure on dataset '" + path + "'");
}

}  // namespace kaconv
