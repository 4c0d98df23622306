#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hybridloss/chain.hpp"
#include "hybridloss/core.hpp"
#include "hybridloss/losses.hpp"

namespace hybrid {

/// Full-precision decimal rendering; 17 significant digits round-trip an
/// IEEE double exactly.
inline std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

inline std::string format_metric(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

inline double parse_double(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": cannot parse number '" + text + "'");
  }
}

/// FNV-1a 64-bit hash, rendered as hex. Used for dataset fingerprints and
/// model-file checksums.
inline std::string fingerprint_hex(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buffer[20];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Flat datasets: base features per instance, expanded to per-label phi via a
// block one-hot layout (phi(x, y) places x in label y's block).
// ---------------------------------------------------------------------------

struct FlatDataset {
  std::size_t label_count = 0;
  std::size_t base_dimension = 0;
  std::vector<std::vector<double>> features;  // base feature rows
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }

  bool operator==(const FlatDataset&) const = default;

  std::vector<FlatInstance> to_instances() const {
    std::vector<FlatInstance> instances;
    instances.reserve(size());
    const std::size_t dim = label_count * base_dimension;
    for (std::size_t i = 0; i < size(); ++i) {
      FlatInstance instance;
      instance.gold_label = labels[i];
      instance.features_per_label.reserve(label_count);
      for (std::size_t y = 0; y < label_count; ++y) {
        std::vector<FeatureVector::Entry> entries;
        for (std::size_t j = 0; j < base_dimension; ++j)
          if (features[i][j] != 0.0)
            entries.emplace_back(y * base_dimension + j, features[i][j]);
        instance.features_per_label.emplace_back(dim, std::move(entries));
      }
      instances.push_back(std::move(instance));
    }
    return instances;
  }
};

inline std::string serialize_flat_csv(const FlatDataset& dataset) {
  std::ostringstream out;
  out << "# hybridloss-flat v1\n";
  out << "# labels " << dataset.label_count << " base_dim " << dataset.base_dimension
      << "\n";
  out << "gold";
  for (std::size_t j = 0; j < dataset.base_dimension; ++j) out << ",x" << j;
  out << "\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << dataset.labels[i];
    for (std::size_t j = 0; j < dataset.base_dimension; ++j)
      out << "," << format_double(dataset.features[i][j]);
    out << "\n";
  }
  return out.str();
}

inline void write_flat_csv(const FlatDataset& dataset, const std::string& path) {
  write_file(path, serialize_flat_csv(dataset));
}

inline FlatDataset read_flat_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "# hybridloss-flat v1")
    throw std::runtime_error(path + ": not a hybridloss flat dataset (bad header)");
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": missing metadata line");
  FlatDataset dataset;
  {
    std::istringstream meta(line);
    std::string hash, labels_word, dim_word;
    if (!(meta >> hash >> labels_word >> dataset.label_count >> dim_word >>
          dataset.base_dimension) ||
        hash != "#" || labels_word != "labels" || dim_word != "base_dim")
      throw std::runtime_error(path + ": malformed metadata line");
  }
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": missing column header");
  std::size_t line_number = 3;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() != dataset.base_dimension + 1)
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": expected " + std::to_string(dataset.base_dimension + 1) +
                               " fields, got " + std::to_string(fields.size()));
    const double gold = parse_double(fields[0], path);
    if (gold < 0 || gold != static_cast<double>(static_cast<std::size_t>(gold)) ||
        static_cast<std::size_t>(gold) >= dataset.label_count)
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": bad gold label '" + fields[0] + "'");
    dataset.labels.push_back(static_cast<std::size_t>(gold));
    std::vector<double> row(dataset.base_dimension);
    for (std::size_t j = 0; j < dataset.base_dimension; ++j)
      row[j] = parse_double(fields[j + 1], path + ": line " + std::to_string(line_number));
    dataset.features.push_back(std::move(row));
  }
  return dataset;
}

// ---------------------------------------------------------------------------
// CoNLL-style tagged corpora: one "TOKEN TAG" line per token, a blank line
// after each sentence, and a JSON vocabulary sidecar at <path>.vocab.json
// mapping tokens and tags to indices.
// ---------------------------------------------------------------------------

struct TaggedCorpus {
  std::vector<std::string> tokens;  // vocabulary; emission feature = index
  std::vector<std::string> tags;    // tag names; tag = index
  std::vector<ChainInstance> sentences;

  bool operator==(const TaggedCorpus&) const = default;

  ChainLayout layout() const { return ChainLayout{tags.size(), tokens.size()}; }
};

namespace detail {

inline std::size_t token_index_of(const ChainInstance& sentence, std::size_t position) {
  const FeatureVector& obs = sentence.observations[position];
  if (obs.entries().size() != 1 || obs.entries().front().second != 1.0)
    throw std::runtime_error(
        "write_conll: observations must be one-hot token features");
  return obs.entries().front().first;
}

}  // namespace detail

inline std::string serialize_conll(const TaggedCorpus& corpus) {
  std::ostringstream out;
  for (const ChainInstance& sentence : corpus.sentences) {
    for (std::size_t j = 0; j < sentence.length(); ++j) {
      const std::size_t token = detail::token_index_of(sentence, j);
      if (token >= corpus.tokens.size())
        throw std::runtime_error("write_conll: token index out of vocabulary");
      const std::size_t tag = sentence.gold_tags[j];
      if (tag >= corpus.tags.size())
        throw std::runtime_error("write_conll: tag index out of range");
      out << corpus.tokens[token] << ' ' << corpus.tags[tag] << '\n';
    }
    out << '\n';
  }
  return out.str();
}

inline void write_conll(const TaggedCorpus& corpus, const std::string& path) {
  write_file(path, serialize_conll(corpus));
  nlohmann::ordered_json sidecar;
  sidecar["format"] = "hybridloss-vocab";
  sidecar["version"] = 1;
  sidecar["tokens"] = corpus.tokens;
  sidecar["tags"] = corpus.tags;
  write_file(path + ".vocab.json", sidecar.dump(2) + "\n");
}

inline TaggedCorpus read_conll(const std::string& path) {
  TaggedCorpus corpus;
  {
    const std::string sidecar_path = path + ".vocab.json";
    nlohmann::json sidecar;
    try {
      sidecar = nlohmann::json::parse(read_file(sidecar_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(sidecar_path + ": invalid JSON (" + e.what() + ")");
    }
    if (sidecar.value("format", "") != "hybridloss-vocab" ||
        sidecar.value("version", 0) != 1)
      throw std::runtime_error(sidecar_path + ": not a hybridloss vocabulary sidecar");
    corpus.tokens = sidecar.at("tokens").get<std::vector<std::string>>();
    corpus.tags = sidecar.at("tags").get<std::vector<std::string>>();
  }

  const std::string content = read_file(path);
  if (!content.empty() && content.back() != '\n')
    throw std::runtime_error(path + ": missing final newline");

  std::vector<FeatureVector::Entry> entry(1);
  std::vector<FeatureVector> observations;
  std::vector<std::size_t> tags;
  std::size_t line_number = 0;
  std::size_t start = 0;
  auto flush_sentence = [&]() {
    if (observations.empty()) return;
    ChainInstance sentence;
    sentence.observations = std::move(observations);
    sentence.gold_tags = std::move(tags);
    corpus.sentences.push_back(std::move(sentence));
    observations.clear();
    tags.clear();
  };
  while (start < content.size()) {
    const std::size_t newline = content.find('\n', start);
    const std::string line = content.substr(start, newline - start);
    start = newline + 1;
    ++line_number;
    if (line.empty()) {
      flush_sentence();
      continue;
    }
    std::istringstream fields(line);
    std::string token, tag, extra;
    if (!(fields >> token >> tag) || (fields >> extra))
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": expected 'TOKEN TAG'");
    const auto token_it = std::find(corpus.tokens.begin(), corpus.tokens.end(), token);
    if (token_it == corpus.tokens.end())
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": token '" + token + "' not in vocabulary");
    const auto tag_it = std::find(corpus.tags.begin(), corpus.tags.end(), tag);
    if (tag_it == corpus.tags.end())
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": unknown tag '" + tag + "'");
    entry[0] = {static_cast<std::size_t>(token_it - corpus.tokens.begin()), 1.0};
    observations.emplace_back(corpus.tokens.size(), entry);
    tags.push_back(static_cast<std::size_t>(tag_it - corpus.tags.begin()));
  }
  flush_sentence();
  return corpus;
}

// ---------------------------------------------------------------------------
// Model artifacts: versioned text format, one indexed weight per line, with
// a content checksum verified on load.
// ---------------------------------------------------------------------------

enum class ModelType { kFlat, kChain };

struct ModelArtifact {
  int version = 1;
  ModelType type = ModelType::kFlat;
  LossSpec loss;
  double lambda = 0.0;
  // flat models
  std::size_t label_count = 0;
  std::size_t base_dimension = 0;
  // chain models
  std::vector<std::string> tags;
  std::size_t emission_dim = 0;

  WeightVector weights;
  std::string train_fingerprint = "-";

  ChainModel to_chain_model() const {
    if (type != ModelType::kChain)
      throw std::logic_error("to_chain_model: not a chain model");
    ChainModel model;
    model.layout = ChainLayout{tags.size(), emission_dim};
    if (weights.size() != model.layout.parameter_count())
      throw std::runtime_error("to_chain_model: weight count mismatch");
    model.weights = weights;
    return model;
  }
};

inline std::string dataset_fingerprint(const FlatDataset& dataset) {
  return fingerprint_hex(serialize_flat_csv(dataset));
}

inline std::string dataset_fingerprint(const TaggedCorpus& corpus) {
  return fingerprint_hex(serialize_conll(corpus));
}

inline std::string dataset_fingerprint(const std::vector<ChainInstance>& sentences,
                                       const TaggedCorpus& corpus) {
  TaggedCorpus slice;
  slice.tokens = corpus.tokens;
  slice.tags = corpus.tags;
  slice.sentences = sentences;
  return dataset_fingerprint(slice);
}

inline void save_model(const ModelArtifact& artifact, const std::string& path) {
  std::ostringstream out;
  out << "hybridloss-model v" << artifact.version << "\n";
  out << "type " << (artifact.type == ModelType::kFlat ? "flat" : "chain") << "\n";
  out << "loss " << loss_name(artifact.loss.kind) << "\n";
  out << "alpha " << format_double(artifact.loss.alpha) << "\n";
  out << "lambda " << format_double(artifact.lambda) << "\n";
  if (artifact.type == ModelType::kFlat) {
    out << "labels " << artifact.label_count << "\n";
    out << "base_dim " << artifact.base_dimension << "\n";
  } else {
    out << "tags " << artifact.tags.size();
    for (const std::string& tag : artifact.tags) out << ' ' << tag;
    out << "\n";
    out << "emission_dim " << artifact.emission_dim << "\n";
  }
  out << "train_fingerprint " << artifact.train_fingerprint << "\n";
  out << "weights " << artifact.weights.size() << "\n";
  for (std::size_t i = 0; i < artifact.weights.size(); ++i)
    out << i << ' ' << format_double(artifact.weights[i]) << "\n";
  const std::string body = out.str();
  write_file(path, body + "checksum " + fingerprint_hex(body) + "\n");
}

inline ModelArtifact load_model(const std::string& path) {
  const std::string content = read_file(path);
  const std::size_t checksum_pos = content.rfind("checksum ");
  if (checksum_pos == std::string::npos)
    throw std::runtime_error(path + ": truncated model file (no checksum)");
  const std::string body = content.substr(0, checksum_pos);
  std::string stored = content.substr(checksum_pos + 9);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r'))
    stored.pop_back();
  if (stored != fingerprint_hex(body))
    throw std::runtime_error(path + ": checksum mismatch (corrupt or edited model file)");

  std::istringstream in(body);
  std::string line;
  auto next_line = [&](const std::string& what) {
    if (!std::getline(in, line))
      throw std::runtime_error(path + ": truncated model file (missing " + what + ")");
    return line;
  };
  ModelArtifact artifact;
  if (next_line("header") != "hybridloss-model v1")
    throw std::runtime_error(path + ": unsupported model format version '" + line + "'");

  auto expect_key = [&](const std::string& key) {
    next_line(key);
    if (line.rfind(key + " ", 0) != 0)
      throw std::runtime_error(path + ": expected '" + key + "' line, got '" + line + "'");
    return line.substr(key.size() + 1);
  };

  const std::string type = expect_key("type");
  if (type == "flat") artifact.type = ModelType::kFlat;
  else if (type == "chain") artifact.type = ModelType::kChain;
  else throw std::runtime_error(path + ": unknown model type '" + type + "'");
  artifact.loss.kind = loss_from_name(expect_key("loss"));
  artifact.loss.alpha = parse_double(expect_key("alpha"), path);
  artifact.lambda = parse_double(expect_key("lambda"), path);
  if (artifact.type == ModelType::kFlat) {
    artifact.label_count = static_cast<std::size_t>(parse_double(expect_key("labels"), path));
    artifact.base_dimension =
        static_cast<std::size_t>(parse_double(expect_key("base_dim"), path));
  } else {
    std::istringstream tag_line(expect_key("tags"));
    std::size_t count = 0;
    if (!(tag_line >> count)) throw std::runtime_error(path + ": malformed tags line");
    std::string tag;
    while (tag_line >> tag) artifact.tags.push_back(tag);
    if (artifact.tags.size() != count)
      throw std::runtime_error(path + ": tag count mismatch");
    artifact.emission_dim =
        static_cast<std::size_t>(parse_double(expect_key("emission_dim"), path));
  }
  artifact.train_fingerprint = expect_key("train_fingerprint");
  const std::size_t weight_count =
      static_cast<std::size_t>(parse_double(expect_key("weights"), path));
  artifact.weights.reserve(weight_count);
  for (std::size_t i = 0; i < weight_count; ++i) {
    next_line("weight " + std::to_string(i));
    std::istringstream weight_line(line);
    std::size_t index = 0;
    std::string value;
    if (!(weight_line >> index >> value) || index != i)
      throw std::runtime_error(path + ": malformed weight line '" + line + "'");
    artifact.weights.push_back(parse_double(value, path));
  }
  if (std::getline(in, line) && !line.empty())
    throw std::runtime_error(path + ": trailing content after weights");
  return artifact;
}

}  // namespace hybrid
