#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "tvs/dataset.h"
#include "tvs/error.h"
#include "tvs/segments.h"
#include "tvs/synthetic.h"

using namespace tvs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto p = fs::temp_directory_path() / ("tvs_test_dataset_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

EmbeddingTable random_table(std::size_t dim, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  EmbeddingTable t(dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v) x = g(rng);
    t.insert("id" + std::to_string(i), v);
  }
  return t;
}

StoryboardExample make_example(const std::string& id, const std::string& movie, std::vector<std::string> frames) {
  StoryboardExample ex;
  ex.example_id = id;
  ex.movie_id = movie;
  ex.synopsis_text = "A man walks. He sits!";
  ex.text_id = "t_" + id;
  ex.frame_ids = std::move(frames);
  validate_example(ex);
  return ex;
}

}  // namespace

TEST_CASE("EmbeddingTable normalizes and validates") {
  EmbeddingTable t(3);
  t.insert("a", std::vector<float>{3, 0, 4});
  CHECK(t.vector("a").norm() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(t.at("a")[0] == doctest::Approx(0.6f));
  CHECK_THROWS_AS(t.insert("a", std::vector<float>{1, 0, 0}), FormatError);
  CHECK_THROWS_AS(t.insert("b", std::vector<float>{1, 0}), FormatError);
  CHECK_THROWS_AS(t.insert("z", std::vector<float>{0, 0, 0}), FormatError);
  CHECK_THROWS_AS(t.insert("n", std::vector<float>{NAN, 0, 0}), FormatError);
  CHECK_THROWS_AS(t.vector("missing"), LoadError);
  // Already unit vectors keep their exact bits.
  const std::vector<float> u = {0.6f, 0.8f, 0.0f};
  t.insert("u", u);
  CHECK(std::equal(u.begin(), u.end(), t.at("u").begin()));
}

TEST_CASE("embedding file round-trip") {
  const auto dir = temp_dir();
  const auto t = random_table(16, 10, 3);
  save_embeddings(t, dir / "a.tvse");
  const auto back = load_embeddings(dir / "a.tvse");
  CHECK(back == t);
  CHECK(back.dim() == 16);
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back.vector(back.id(i)).norm() == doctest::Approx(1.0).epsilon(1e-4));
  save_embeddings(back, dir / "b.tvse");
  CHECK(bytes_of(dir / "a.tvse") == bytes_of(dir / "b.tvse"));

  // Header layout: magic, u16 version, u32 dim, u64 count.
  const auto raw = bytes_of(dir / "a.tvse");
  CHECK(raw.substr(0, 4) == "TVSE");
  CHECK(static_cast<unsigned char>(raw[4]) == 1);
  CHECK(static_cast<unsigned char>(raw[6]) == 16);
  CHECK(static_cast<unsigned char>(raw[10]) == 10);

  EmbeddingTable empty(8);
  save_embeddings(empty, dir / "e.tvse");
  const auto e = load_embeddings(dir / "e.tvse");
  CHECK(e.size() == 0);
  CHECK(e.dim() == 8);
  fs::remove_all(dir);
}

TEST_CASE("embedding file corruption is rejected") {
  const auto t = random_table(32, 2, 4);
  std::ostringstream os;
  write_embeddings(t, os);
  const std::string good = os.str();

  auto load = [](const std::string& s) {
    std::istringstream is(s);
    return read_embeddings(is);
  };
  CHECK(load(good) == t);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(load(bad_magic), FormatError);

  std::string bad_version = good;
  bad_version[4] = 2;
  CHECK_THROWS_AS(load(bad_version), FormatError);

  // Truncation mid-row reports a byte offset.
  try {
    load(good.substr(0, good.size() - 3));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }

  // A row one float short: the second row is misaligned, the file ends early.
  std::string short_row = good;
  const std::size_t header = 4 + 2 + 4 + 8;
  const std::size_t first_row_floats = header + 2 + 3;
  short_row.erase(first_row_floats + 31 * 4, 4);
  CHECK_THROWS_AS(load(short_row), FormatError);

  CHECK_THROWS_AS(load(good + "x"), FormatError);
}

TEST_CASE("dataset JSON Lines round-trip and validation") {
  const auto dir = temp_dir();
  std::vector<StoryboardExample> exs = {make_example("e1", "m1", {"f1", "f2", "f3"}),
                                        make_example("e2", "m1", {"f4", "f5"}),
                                        make_example("e3", "m2", {"f6", "f7", "f8", "f9"})};
  exs[2].gt_variants.push_back({"f7", "f6", "f8", "f9"});
  save_examples(exs, dir / "d.jsonl");
  const auto back = load_examples(dir / "d.jsonl");
  CHECK(back == exs);
  CHECK(back[0].gt_variants.size() == 1);
  CHECK(back[0].gt_variants[0] == back[0].frame_ids);

  // Missing gt_variants defaults to the canonical order.
  const auto ex = example_from_json_line(
      R"({"example_id":"x","movie_id":"m","synopsis_text":"s","text_id":"t","frame_ids":["a","b"]})");
  CHECK(ex.gt_variants == std::vector<std::vector<std::string>>{{"a", "b"}});

  CHECK_THROWS_AS(example_from_json_line(R"({"example_id":"x")"), FormatError);
  CHECK_THROWS_AS(example_from_json_line(
                      R"({"example_id":"x","movie_id":"m","synopsis_text":"s","text_id":"t","frame_ids":["a"]})"),
                  FormatError);
  CHECK_THROWS_AS(example_from_json_line(
                      R"({"example_id":"x","movie_id":"m","synopsis_text":"s","text_id":"t","frame_ids":["a","a"]})"),
                  FormatError);
  CHECK_THROWS_AS(
      example_from_json_line(
          R"({"example_id":"x","movie_id":"m","synopsis_text":"s","text_id":"t","frame_ids":["a","b"],"gt_variants":[["a","c"]]})"),
      FormatError);

  // load_dataset resolves references and names a missing id.
  EmbeddingTable texts(4), frames(4);
  for (const auto& e : exs) texts.insert(e.text_id, Eigen::VectorXd::Ones(4));
  for (int i = 1; i <= 9; ++i) frames.insert("f" + std::to_string(i), Eigen::VectorXd::Unit(4, i % 4));
  save_embeddings(texts, dir / "t.tvse");
  save_embeddings(frames, dir / "f.tvse");
  const auto d = load_dataset(dir / "d.jsonl", dir / "t.tvse", dir / "f.tvse");
  CHECK(d.examples.size() == 3);
  CHECK(d.frames.dim() == 4);

  auto broken = exs;
  broken[1].frame_ids[0] = "f999";
  broken[1].gt_variants = {broken[1].frame_ids};
  save_examples(broken, dir / "bad.jsonl");
  try {
    load_dataset(dir / "bad.jsonl", dir / "t.tvse", dir / "f.tvse");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("f999") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("split_dataset") {
  std::vector<StoryboardExample> exs;
  for (int m = 0; m < 10; ++m) exs.push_back(make_example("e" + std::to_string(m), "m" + std::to_string(m), {"a", "b"}));
  const auto s = split_dataset(exs, {0.8, 0.1, 0.1}, 1);
  CHECK(s.train.size() == 8);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);
  const auto s2 = split_dataset(exs, {0.8, 0.1, 0.1}, 1);
  CHECK(s.train == s2.train);
  CHECK(s.test == s2.test);
  CHECK_THROWS_AS(split_dataset({exs[0], exs[1]}, {0.8, 0.1, 0.1}, 1), InvalidArgument);
  CHECK_THROWS_AS(split_dataset(exs, {0.5, 0.1}, 1), InvalidArgument);

  // Property: movie-disjoint for random movie assignments and seeds.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<StoryboardExample> many;
    const int movies = 3 + static_cast<int>(rng() % 30);
    const int n = movies + static_cast<int>(rng() % 100);
    for (int i = 0; i < n; ++i) {
      const int mv = i < movies ? i : static_cast<int>(rng() % static_cast<unsigned>(movies));
      many.push_back(make_example("x" + std::to_string(i), "m" + std::to_string(mv), {"a", "b"}));
    }
    const auto sp = split_dataset(many, {0.7, 0.15, 0.15}, rng());
    std::map<std::string, std::string> movie_of;
    for (const auto& e : many) movie_of[e.example_id] = e.movie_id;
    std::set<std::string> tr, va, te, all;
    for (const auto& id : sp.train) tr.insert(movie_of[id]);
    for (const auto& id : sp.val) va.insert(movie_of[id]);
    for (const auto& id : sp.test) te.insert(movie_of[id]);
    for (const auto& m : va) CHECK_FALSE(tr.contains(m));
    for (const auto& m : te) {
      CHECK_FALSE(tr.contains(m));
      CHECK_FALSE(va.contains(m));
    }
    CHECK(sp.train.size() + sp.val.size() + sp.test.size() == many.size());
    CHECK_FALSE(sp.val.empty());
    CHECK_FALSE(sp.test.empty());
  }
}

TEST_CASE("corpus_stats") {
  auto with_text = [](const std::string& text) {
    auto ex = make_example("e", "m", {"a", "b"});
    ex.synopsis_text = text;
    return std::vector<StoryboardExample>{ex};
  };
  auto s = corpus_stats(with_text("the cat the cat"), {1, 2});
  CHECK(s.unique_ngrams[1] == 2);
  CHECK(s.unique_ngrams[2] == 2);  // "the cat", "cat the"
  CHECK_FALSE(s.avg_concreteness.has_value());
  CHECK(s.total_words == 4);

  ConcretenessLexicon banana = {{"banana", 5.0}};
  CHECK(*corpus_stats(with_text("banana"), {1}, &banana).avg_concreteness == doctest::Approx(5.0));
  ConcretenessLexicon love = {{"love", 2.07}};
  CHECK(*corpus_stats(with_text("love"), {1}, &love).avg_concreteness == doctest::Approx(2.07));
  CHECK(*corpus_stats(with_text("Banana, banana and KIWI."), {1}, &banana).avg_concreteness == doctest::Approx(5.0));

  const auto empty = corpus_stats({}, {1, 2});
  CHECK(empty.unique_ngrams.at(1) == 0);
  CHECK_FALSE(empty.avg_concreteness.has_value());
  CHECK_THROWS_AS(corpus_stats({}, {}), InvalidArgument);

  CHECK(tokenize("Hello, World!  it's") == std::vector<std::string>{"hello", "world", "its"});

  const auto dir = temp_dir();
  write_bytes(dir / "lex.tsv", "banana\t5\nlove\t2.07\n");
  const auto lex = load_lexicon(dir / "lex.tsv");
  CHECK(lex.at("love") == doctest::Approx(2.07));
  write_bytes(dir / "bad.tsv", "banana 5\n");
  CHECK_THROWS_AS(load_lexicon(dir / "bad.tsv"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("synthetic generator: length distribution and determinism") {
  SyntheticConfig c;
  c.n_examples = 1000;
  const auto d = generate_synthetic(c, 7);
  std::size_t short_ones = 0;
  for (const auto& ex : d.dataset.examples) {
    CHECK(ex.length() >= 3);
    CHECK(ex.length() <= 11);
    short_ones += ex.length() <= 4;
  }
  const double frac = static_cast<double>(short_ones) / 1000.0;
  CHECK(frac >= 0.55);
  CHECK(frac <= 0.65);

  const auto again = generate_synthetic(c, 7);
  CHECK(again.dataset.examples == d.dataset.examples);
  CHECK(again.dataset.texts == d.dataset.texts);
  CHECK(again.dataset.frames == d.dataset.frames);
  std::ostringstream a, b;
  write_embeddings(d.dataset.frames, a);
  write_embeddings(again.dataset.frames, b);
  CHECK(a.str() == b.str());
  CHECK_FALSE(generate_synthetic(c, 8).dataset.frames == d.dataset.frames);

  // Planted segment keys coincide with segment_text.
  for (const auto& ex : d.dataset.examples) {
    const auto n = tokenize(ex.synopsis_text).size();
    for (const auto& sp : segment_text(n, ex.length())) CHECK(d.dataset.texts.contains(span_key(ex.text_id, sp)));
    CHECK(d.dataset.texts.contains(token_key(ex.text_id, n - 1)));
    CHECK_FALSE(d.dataset.texts.contains(token_key(ex.text_id, n)));
  }

  SyntheticConfig bad;
  bad.dim = 3;
  CHECK_THROWS_AS(generate_synthetic(bad, 1), InvalidArgument);
  bad = {};
  bad.signal_strength = 1.5;
  CHECK_THROWS_AS(generate_synthetic(bad, 1), InvalidArgument);
}

TEST_CASE("synthetic generator: noise 0 is recovered by an angle-sort oracle") {
  SyntheticConfig c;
  c.n_examples = 300;
  c.noise = 0.0;
  c.signal_strength = 1.0;
  const auto d = generate_synthetic(c, 3);
  const auto u = d.geometry.plane_u(), v = d.geometry.plane_v();
  const double step = d.geometry.step_angle;
  std::size_t recovered = 0;
  for (const auto& ex : d.dataset.examples) {
    const auto n = tokenize(ex.synopsis_text).size();
    const auto first = d.dataset.texts.vector(span_key(ex.text_id, segment_text(n, ex.length())[0]));
    const double a0 = std::atan2(first.dot(v), first.dot(u));
    std::vector<std::pair<double, std::string>> keyed;
    for (const auto& f : ex.frame_ids) {
      const auto x = d.dataset.frames.vector(f);
      const double rel = std::fmod(std::atan2(x.dot(v), x.dot(u)) - a0 + step / 2 + 4 * std::numbers::pi,
                                   2 * std::numbers::pi);
      keyed.emplace_back(rel, f);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::string> order;
    for (const auto& [k, id] : keyed) order.push_back(id);
    recovered += order == ex.frame_ids;
  }
  CHECK(recovered == d.dataset.examples.size());
}
