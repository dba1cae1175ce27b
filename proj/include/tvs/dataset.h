#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tvs/embedding_table.h"

namespace tvs {

inline constexpr std::size_t kMinStoryboardLength = 2;
inline constexpr std::size_t kMaxStoryboardLength = 20;

struct StoryboardExample {
  std::string example_id;
  std::string movie_id;
  std::string synopsis_text;
  std::string text_id;
  std::vector<std::string> frame_ids;
  // Alternative acceptable orderings; the canonical order is always present.
  std::vector<std::vector<std::string>> gt_variants;

  std::size_t length() const { return frame_ids.size(); }
  friend bool operator==(const StoryboardExample&, const StoryboardExample&) = default;
};

// Throws FormatError when an example breaks its invariants (length bounds,
// duplicate frames, variants that are not permutations). Adds the canonical
// order to gt_variants when missing.
void validate_example(StoryboardExample& example);

struct Dataset {
  std::vector<StoryboardExample> examples;
  EmbeddingTable texts;
  EmbeddingTable frames;
};

// JSON Lines, one example per line.
void save_examples(const std::vector<StoryboardExample>& examples, const std::filesystem::path& path);
std::vector<StoryboardExample> load_examples(const std::filesystem::path& path);
std::string example_to_json_line(const StoryboardExample& example);
StoryboardExample example_from_json_line(const std::string& line);

// Loads all three files and checks that every text and frame id resolves.
Dataset load_dataset(const std::filesystem::path& dataset_path, const std::filesystem::path& text_emb_path,
                     const std::filesystem::path& frame_emb_path);
void check_references(const std::vector<StoryboardExample>& examples, const EmbeddingTable& texts,
                      const EmbeddingTable& frames);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

// Movie-disjoint split. Movies are shuffled with `seed` and assigned whole to
// the split whose example count is furthest below its target share.
DatasetSplit split_dataset(const std::vector<StoryboardExample>& examples, const std::vector<double>& ratios,
                           std::uint64_t seed);

std::vector<StoryboardExample> select_examples(const std::vector<StoryboardExample>& examples,
                                               const std::vector<std::string>& ids);

struct CorpusStats {
  std::map<int, std::size_t> unique_ngrams;
  std::optional<double> avg_concreteness;
  std::size_t total_words = 0;
  double mean_words = 0.0;
  std::size_t min_words = 0;
  std::size_t max_words = 0;
};

using ConcretenessLexicon = std::map<std::string, double, std::less<>>;

// Lowercase, strip ASCII punctuation, split on whitespace.
std::vector<std::string> tokenize(const std::string& text);

ConcretenessLexicon load_lexicon(const std::filesystem::path& path);

CorpusStats corpus_stats(const std::vector<StoryboardExample>& examples, const std::vector<int>& n_values,
                         const ConcretenessLexicon* lexicon = nullptr);

}  // namespace tvs
