#pragma once

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybrid {

/// Fraction of positions where prediction and gold disagree.
inline double zero_one_error(const std::vector<std::size_t>& predictions,
                             const std::vector<std::size_t>& golds) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("zero_one_error: length mismatch (" +
                                std::to_string(predictions.size()) + " vs " +
                                std::to_string(golds.size()) + ")");
  if (predictions.empty()) throw std::invalid_argument("zero_one_error: empty input");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] != golds[i]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

/// Half-open token span [begin, end) of one chunk type.
struct Chunk {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string type;

  auto operator<=>(const Chunk&) const = default;
};

namespace detail {

inline void bad_tag(const std::string& tag, std::size_t sentence, std::size_t position) {
  throw std::invalid_argument("malformed chunk tag '" + tag + "' at sentence " +
                              std::to_string(sentence) + ", position " +
                              std::to_string(position));
}

}  // namespace detail

/// Extracts maximal B-then-I spans. An I- tag without a preceding chunk of
/// the same type starts a new chunk (conlleval-style repair).
inline std::vector<Chunk> extract_chunks(const std::vector<std::string>& tags,
                                         std::size_t sentence_index = 0) {
  std::vector<Chunk> chunks;
  bool open = false;
  Chunk current;
  auto close = [&]() {
    if (open) chunks.push_back(current);
    open = false;
  };
  for (std::size_t j = 0; j < tags.size(); ++j) {
    const std::string& tag = tags[j];
    if (tag == "O") {
      close();
    } else if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
      const std::string type = tag.substr(2);
      if (tag[0] == 'B' || !open || current.type != type) {
        close();
        current = Chunk{j, j + 1, type};
        open = true;
      } else {
        current.end = j + 1;
      }
    } else {
      detail::bad_tag(tag, sentence_index, j);
    }
  }
  close();
  return chunks;
}

/// Token accuracy plus micro-averaged chunk precision/recall/F1.
struct ChunkEval {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t predicted_chunks = 0;
  std::size_t gold_chunks = 0;
  std::size_t correct_chunks = 0;
  std::size_t tokens = 0;
  std::size_t correct_tokens = 0;
};

/// Chunk metrics over a corpus of tagged sentences. A predicted chunk counts
/// as correct only when span and type both match a gold chunk exactly.
/// Conventions when a side has no chunks: the corresponding metric is 0
/// unless both sides are empty, which scores 1.
inline ChunkEval chunk_f1(const std::vector<std::vector<std::string>>& predicted,
                          const std::vector<std::vector<std::string>>& gold) {
  if (predicted.size() != gold.size())
    throw std::invalid_argument("chunk_f1: sentence count mismatch");
  ChunkEval eval;
  for (std::size_t s = 0; s < predicted.size(); ++s) {
    if (predicted[s].size() != gold[s].size())
      throw std::invalid_argument("chunk_f1: sentence " + std::to_string(s) +
                                  " length mismatch");
    eval.tokens += predicted[s].size();
    for (std::size_t j = 0; j < predicted[s].size(); ++j)
      if (predicted[s][j] == gold[s][j]) ++eval.correct_tokens;

    std::vector<Chunk> predicted_chunks = extract_chunks(predicted[s], s);
    std::vector<Chunk> gold_chunks = extract_chunks(gold[s], s);
    eval.predicted_chunks += predicted_chunks.size();
    eval.gold_chunks += gold_chunks.size();
    std::sort(predicted_chunks.begin(), predicted_chunks.end());
    std::sort(gold_chunks.begin(), gold_chunks.end());
    std::vector<Chunk> matched;
    std::set_intersection(predicted_chunks.begin(), predicted_chunks.end(),
                          gold_chunks.begin(), gold_chunks.end(),
                          std::back_inserter(matched));
    eval.correct_chunks += matched.size();
  }
  eval.accuracy = eval.tokens == 0
                      ? 1.0
                      : static_cast<double>(eval.correct_tokens) /
                            static_cast<double>(eval.tokens);
  if (eval.predicted_chunks == 0 && eval.gold_chunks == 0) {
    eval.precision = eval.recall = eval.f1 = 1.0;
    return eval;
  }
  eval.precision = eval.predicted_chunks == 0
                       ? 0.0
                       : static_cast<double>(eval.correct_chunks) /
                             static_cast<double>(eval.predicted_chunks);
  eval.recall = eval.gold_chunks == 0
                    ? 0.0
                    : static_cast<double>(eval.correct_chunks) /
                          static_cast<double>(eval.gold_chunks);
  eval.f1 = (eval.precision + eval.recall) == 0.0
                ? 0.0
                : 2.0 * eval.precision * eval.recall / (eval.precision + eval.recall);
  return eval;
}

inline ChunkEval chunk_f1(const std::vector<std::string>& predicted,
                          const std::vector<std::string>& gold) {
  return chunk_f1(std::vector<std::vector<std::string>>{predicted},
                  std::vector<std::vector<std::string>>{gold});
}

}  // namespace hybrid
