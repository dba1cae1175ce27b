#include "tvs/dataset.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tvs/error.h"

namespace tvs {

using nlohmann::json;

void validate_example(StoryboardExample& ex) {
  const auto n = ex.frame_ids.size();
  if (n < kMinStoryboardLength || n > kMaxStoryboardLength) {
    throw FormatError("example '" + ex.example_id + "' has " + std::to_string(n) +
                      " frames; expected between 2 and 20");
  }
  std::set<std::string> unique(ex.frame_ids.begin(), ex.frame_ids.end());
  if (unique.size() != n) throw FormatError("example '" + ex.example_id + "' repeats a frame id");
  bool has_canonical = false;
  for (const auto& variant : ex.gt_variants) {
    std::set<std::string> vs(variant.begin(), variant.end());
    if (variant.size() != n || vs != unique) {
      throw FormatError("example '" + ex.example_id + "' has a gt variant that is not a permutation of its frames");
    }
    has_canonical = has_canonical || variant == ex.frame_ids;
  }
  if (!has_canonical) ex.gt_variants.insert(ex.gt_variants.begin(), ex.frame_ids);
}

std::string example_to_json_line(const StoryboardExample& ex) {
  json j = {{"example_id", ex.example_id},       {"movie_id", ex.movie_id}, {"synopsis_text", ex.synopsis_text},
            {"text_id", ex.text_id},             {"frame_ids", ex.frame_ids},
            {"gt_variants", ex.gt_variants}};
  return j.dump();
}

StoryboardExample example_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  StoryboardExample ex;
  try {
    ex.example_id = j.at("example_id").get<std::string>();
    ex.movie_id = j.at("movie_id").get<std::string>();
    ex.synopsis_text = j.at("synopsis_text").get<std::string>();
    ex.text_id = j.at("text_id").get<std::string>();
    ex.frame_ids = j.at("frame_ids").get<std::vector<std::string>>();
    if (j.contains("gt_variants")) ex.gt_variants = j.at("gt_variants").get<std::vector<std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad example record: ") + e.what());
  }
  validate_example(ex);
  return ex;
}

void save_examples(const std::vector<StoryboardExample>& examples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot open '" + path.string() + "' for writing");
  for (const auto& ex : examples) out << example_to_json_line(ex) << '\n';
}

std::vector<StoryboardExample> load_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset file '" + path.string() + "'");
  std::vector<StoryboardExample> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(example_from_json_line(line));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(out.back().example_id).second) {
      throw FormatError("duplicate example_id '" + out.back().example_id + "'");
    }
  }
  return out;
}

void check_references(const std::vector<StoryboardExample>& examples, const EmbeddingTable& texts,
                      const EmbeddingTable& frames) {
  for (const auto& ex : examples) {
    if (!texts.contains(ex.text_id)) {
      throw LoadError("example '" + ex.example_id + "' references unknown text id '" + ex.text_id + "'");
    }
    for (const auto& f : ex.frame_ids) {
      if (!frames.contains(f)) {
        throw LoadError("example '" + ex.example_id + "' references unknown frame id '" + f + "'");
      }
    }
  }
}

Dataset load_dataset(const std::filesystem::path& dataset_path, const std::filesystem::path& text_emb_path,
                     const std::filesystem::path& frame_emb_path) {
  Dataset d{load_examples(dataset_path), load_embeddings(text_emb_path), load_embeddings(frame_emb_path)};
  check_references(d.examples, d.texts, d.frames);
  return d;
}

DatasetSplit split_dataset(const std::vector<StoryboardExample>& examples, const std::vector<double>& ratios,
                           std::uint64_t seed) {
  if (ratios.empty()) throw InvalidArgument("split ratios are empty");
  const double total = std::accumulate(ratios.begin(), ratios.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) throw InvalidArgument("split ratios must sum to 1");
  for (double r : ratios) {
    if (r < 0.0) throw InvalidArgument("split ratios must be nonnegative");
  }

  // Movies in first-appearance order, then shuffled by seed.
  std::vector<std::string> movies;
  std::map<std::string, std::vector<std::string>> by_movie;
  for (const auto& ex : examples) {
    auto& bucket = by_movie[ex.movie_id];
    if (bucket.empty()) movies.push_back(ex.movie_id);
    bucket.push_back(ex.example_id);
  }
  const std::size_t active =
      static_cast<std::size_t>(std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0.0; }));
  if (movies.size() < active) {
    throw InvalidArgument("cannot split " + std::to_string(movies.size()) + " movies into " +
                          std::to_string(active) + " non-empty splits");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(movies.begin(), movies.end(), rng);

  const auto n_splits = ratios.size();
  std::vector<double> target(n_splits);
  for (std::size_t s = 0; s < n_splits; ++s) target[s] = ratios[s] * static_cast<double>(examples.size());
  std::vector<std::size_t> count(n_splits, 0), movie_count(n_splits, 0);
  std::vector<std::vector<std::string>> out(n_splits);

  for (std::size_t m = 0; m < movies.size(); ++m) {
    const auto& ids = by_movie[movies[m]];
    std::size_t empty_needed = 0;
    for (std::size_t s = 0; s < n_splits; ++s) empty_needed += (ratios[s] > 0.0 && movie_count[s] == 0);
    const bool force_empty = movies.size() - m <= empty_needed;
    std::size_t best = n_splits;
    double best_deficit = -1e300;
    for (std::size_t s = 0; s < n_splits; ++s) {
      if (ratios[s] <= 0.0) continue;
      if (force_empty && movie_count[s] != 0) continue;
      const double deficit = target[s] - static_cast<double>(count[s]);
      if (deficit > best_deficit + 1e-9) {
        best_deficit = deficit;
        best = s;
      }
    }
    count[best] += ids.size();
    ++movie_count[best];
    out[best].insert(out[best].end(), ids.begin(), ids.end());
  }

  DatasetSplit split;
  split.train = std::move(out[0]);
  if (n_splits > 1) split.val = std::move(out[1]);
  if (n_splits > 2) split.test = std::move(out[2]);
  return split;
}

std::vector<StoryboardExample> select_examples(const std::vector<StoryboardExample>& examples,
                                               const std::vector<std::string>& ids) {
  std::map<std::string_view, const StoryboardExample*> by_id;
  for (const auto& ex : examples) by_id.emplace(ex.example_id, &ex);
  std::vector<StoryboardExample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw LoadError("unknown example id '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (!std::ispunct(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

ConcretenessLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open lexicon '" + path.string() + "'");
  ConcretenessLexicon lexicon;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected word<TAB>rating");
    }
    auto word = line.substr(0, tab);
    std::transform(word.begin(), word.end(), word.begin(), [](unsigned char c) { return std::tolower(c); });
    try {
      lexicon[word] = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad rating");
    }
  }
  return lexicon;
}

CorpusStats corpus_stats(const std::vector<StoryboardExample>& examples, const std::vector<int>& n_values,
                         const ConcretenessLexicon* lexicon) {
  if (n_values.empty()) throw InvalidArgument("corpus_stats needs at least one n");
  CorpusStats stats;
  std::map<int, std::set<std::string>> grams;
  for (int n : n_values) {
    if (n < 1) throw InvalidArgument("n-gram order must be >= 1");
    grams[n];
  }
  double rating_sum = 0.0;
  std::size_t covered = 0;
  bool first = true;
  for (const auto& ex : examples) {
    const auto tokens = tokenize(ex.synopsis_text);
    stats.total_words += tokens.size();
    stats.min_words = first ? tokens.size() : std::min(stats.min_words, tokens.size());
    stats.max_words = std::max(stats.max_words, tokens.size());
    first = false;
    for (auto& [n, set] : grams) {
      const auto nn = static_cast<std::size_t>(n);
      for (std::size_t i = 0; i + nn <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t k = 1; k < nn; ++k) key += ' ' + tokens[i + k];
        set.insert(std::move(key));
      }
    }
    if (lexicon != nullptr) {
      for (const auto& t : tokens) {
        if (auto it = lexicon->find(t); it != lexicon->end()) {
          rating_sum += it->second;
          ++covered;
        }
      }
    }
  }
  for (const auto& [n, set] : grams) stats.unique_ngrams[n] = set.size();
  if (!examples.empty()) stats.mean_words = static_cast<double>(stats.total_words) / examples.size();
  if (covered > 0) stats.avg_concreteness = rating_sum / static_cast<double>(covered);
  return stats;
}

}  // namespace tvs
