#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mmkws/error.hpp"
#include "mmkws/features.hpp"
#include "mmkws/io.hpp"
#include "mmkws/lexicon.hpp"
#include "mmkws/mining.hpp"
#include "mmkws/rng.hpp"

using namespace mmkws;

namespace {

std::string tmp_path(const std::string& name) {
  return std::string(MMKWS_TEST_TMP_DIR) + "/" + name;
}

const Lexicon& demo_lexicon() {
  static const Lexicon lex = [] {
    const std::string path = tmp_path("augmentation_lexicon.tsv");
    io::write_text_file(path,
                        "good\tG UH D\n"
                        "night\tN AY T\n"
                        "light\tL AY T\n"
                        "boy\tB OY\n"
                        "bay\tB EY\n"
                        "day\tD EY\n"
                        "dog\tD AO G\n"
                        "fog\tF AO G\n"
                        "cat\tK AE T\n"
                        "hat\tHH AE T\n");
    return Lexicon::load(path);
  }();
  return lex;
}

const SemanticTable& demo_semantics() {
  static const SemanticTable table = [] {
    const std::string path = tmp_path("augmentation_semantics.vec");
    io::write_text_file(path,
                        "good 1 0 0\n"
                        "night 0 1 0\n"
                        "day 0 0.9 0.1\n"
                        "light 0 0.5 0.5\n"
                        "dog 0.7 0.7 0\n");
    return SemanticTable::load(path);
  }();
  return table;
}

// Plain recursive Levenshtein with memoization: an independent oracle for
// the two-row dynamic program.
int64_t lev_oracle(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
  std::map<std::pair<size_t, size_t>, int64_t> memo;
  std::function<int64_t(size_t, size_t)> go = [&](size_t i, size_t j) -> int64_t {
    if (i == a.size()) return static_cast<int64_t>(b.size() - j);
    if (j == b.size()) return static_cast<int64_t>(a.size() - i);
    const auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    int64_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    memo[key] = best;
    return best;
  };
  return go(0, 0);
}

std::vector<int64_t> random_seq(Rng& rng, int64_t max_len) {
  std::vector<int64_t> s(static_cast<size_t>(rng.uniform_int(0, max_len)));
  for (auto& v : s) v = rng.uniform_int(0, 4);
  return s;
}

}  // namespace

TEST_CASE("word normalization keeps letters only and lowercases") {
  CHECK(normalize_word("Hey,") == "hey");
  CHECK(normalize_word("SIRI!") == "siri");
  CHECK(normalize_word("b2b") == "bb");
  CHECK(normalize_word("42") == "");
  CHECK(split_words("  Hey,   SIRI! ") == std::vector<std::string>({"hey", "siri"}));
  CHECK(split_words(" 42 ") == std::vector<std::string>{});
  CHECK(join_words({"a", "b"}) == "a b");
}

TEST_CASE("pronunciations come from the dictionary with a spelling fallback") {
  const Lexicon& lex = demo_lexicon();
  CHECK(lex.contains("good"));
  CHECK(lex.g2p("good") == std::vector<std::string>({"G", "UH", "D"}));
  // Out-of-vocabulary words fall back to one symbol per letter, with x
  // expanding to two.
  CHECK(!lex.contains("zzz"));
  CHECK(lex.g2p("zzz") == std::vector<std::string>({"Z", "Z", "Z"}));
  CHECK(lex.g2p("box") == std::vector<std::string>({"B", "AA", "K", "S"}));
  CHECK_THROWS_AS(lex.g2p(""), Error);

  // The inventory is closed over fallback output: every symbol any lookup
  // can produce has an id.
  for (char c = 'a'; c <= 'z'; ++c) {
    for (const auto& sym : lex.g2p(std::string(1, c))) CHECK(lex.symbol_id(sym) >= 0);
  }
  CHECK(std::is_sorted(lex.inventory().begin(), lex.inventory().end()));

  CHECK(lex.phrase_phonemes({"good", "night"}) ==
        std::vector<std::string>({"G", "UH", "D", "N", "AY", "T"}));
  const auto ids = lex.phrase_ids({"good", "night"});
  REQUIRE(ids.size() == 6);
  CHECK(ids[0] == lex.symbol_id("G"));
  CHECK(ids[5] == lex.symbol_id("T"));
}

TEST_CASE("malformed pronunciation files are rejected with their line") {
  const std::string path = tmp_path("bad_lexicon.tsv");
  io::write_text_file(path, "good\tG UH D\nnopron\n");
  try {
    Lexicon::load(path);
    FAIL("expected a load error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("vocabulary maps unknown words to id zero") {
  const std::string path = tmp_path("augmentation_vocab.txt");
  io::write_text_file(path, "<unk>\ngood\nnight\n");
  const Vocab vocab = Vocab::load(path);
  CHECK(vocab.size() == 3);
  CHECK(vocab.id_of("good") == 1);
  CHECK(vocab.id_of("martian") == 0);
  CHECK(vocab.encode({"night", "martian"}) == std::vector<int64_t>({2, 0}));
  CHECK(vocab.token(2) == "night");
}

TEST_CASE("semantic vectors load with consistent dimensions") {
  const SemanticTable& table = demo_semantics();
  CHECK(table.dim() == 3);
  CHECK(table.contains("good"));
  CHECK(!table.contains("martian"));
  CHECK(cosine(table.vector_of("good"), table.vector_of("good")) == doctest::Approx(1.0));
  CHECK(cosine(table.vector_of("good"), table.vector_of("night")) == doctest::Approx(0.0));
  // cos(night, day) = 0.9 / (1 * sqrt(0.81 + 0.01))
  CHECK(cosine(table.vector_of("night"), table.vector_of("day")) ==
        doctest::Approx(0.9 / std::sqrt(0.82)).epsilon(1e-12));
  CHECK_THROWS_AS(cosine({1.0, 0.0}, {0.0, 0.0, 1.0}), Error);
  CHECK_THROWS_AS(cosine({1.0, 0.0}, {0.0, 0.0}), Error);

  const std::string bad_dim = tmp_path("bad_dim.vec");
  io::write_text_file(bad_dim, "a 1 0\nb 1 0 0\n");
  CHECK_THROWS_AS(SemanticTable::load(bad_dim), Error);
  const std::string zero_vec = tmp_path("zero_vec.vec");
  io::write_text_file(zero_vec, "a 0 0\n");
  CHECK_THROWS_AS(SemanticTable::load(zero_vec), Error);
}

TEST_CASE("edit distance handles the textbook cases") {
  auto d = [](const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
    return phoneme_edit_distance(a, b);
  };
  CHECK(d({}, {}) == 0);
  CHECK(d({1, 2, 3}, {1, 2, 3}) == 0);
  CHECK(d({1, 2, 3}, {1, 2}) == 1);
  CHECK(d({1, 2, 3}, {1, 9, 3}) == 1);
  CHECK(d({}, {4, 5}) == 2);
  // "kitten" -> "sitting" with letters mapped to numbers.
  CHECK(d({10, 8, 19, 19, 4, 13}, {18, 8, 19, 19, 8, 13, 6}) == 3);
}

TEST_CASE("edit distance agrees with a recursive oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_seq(rng, 8);
    const auto b = random_seq(rng, 8);
    CHECK(phoneme_edit_distance(a, b) == lev_oracle(a, b));
  }
}

TEST_CASE("edit distance satisfies the metric axioms") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_seq(rng, 6);
    const auto b = random_seq(rng, 6);
    const auto c = random_seq(rng, 6);
    CHECK(phoneme_edit_distance(a, a) == 0);
    CHECK(phoneme_edit_distance(a, b) == phoneme_edit_distance(b, a));
    CHECK(phoneme_edit_distance(a, c) <=
          phoneme_edit_distance(a, b) + phoneme_edit_distance(b, c));
    if (a != b) CHECK(phoneme_edit_distance(a, b) >= 1);
  }
}

TEST_CASE("bounded edit distance is exact within the bound") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_seq(rng, 8);
    const auto b = random_seq(rng, 8);
    const int64_t exact = phoneme_edit_distance(a, b);
    const int64_t bound = rng.uniform_int(0, 8);
    const int64_t got = phoneme_edit_distance_bounded(a, b, bound);
    if (exact <= bound) {
      CHECK(got == exact);
    } else {
      CHECK(got > bound);  // any proof of exceedance is acceptable
    }
  }
}

TEST_CASE("phonetic neighbor mining matches exhaustive search") {
  const Lexicon& lex = demo_lexicon();
  const std::vector<std::string> corpus = {
      "good night", "good light", "light night", "boy",     "bay",      "day",
      "dog",        "fog",        "cat",         "hat",     "good boy", "night light",
      "dog fog",    "cat hat",    "day bay",     "fog cat", "hat dog",  "bay night",
      "light day",  "good hat",   "boy day",     "night",   "good",     "light",
  };
  const int64_t k = 4;
  Rng rng(19);
  int checked = 0;
  for (const auto& target : corpus) {
    // Exhaustive reference: score everything, sort, truncate.
    const auto t_words = split_words(target);
    const auto t_ids = lex.phrase_ids(t_words);
    const std::string t_norm = join_words(t_words);
    std::vector<PhoneticNeighbor> want;
    for (const auto& phrase : corpus) {
      const auto words = split_words(phrase);
      const std::string norm = join_words(words);
      if (norm == t_norm) continue;
      want.push_back({norm, phoneme_edit_distance(t_ids, lex.phrase_ids(words))});
    }
    std::sort(want.begin(), want.end(), [](const PhoneticNeighbor& x, const PhoneticNeighbor& y) {
      return x.distance != y.distance ? x.distance < y.distance : x.phrase < y.phrase;
    });
    want.resize(static_cast<size_t>(k));

    const auto got = mine_phonetic_neighbors(target, corpus, k, lex);
    CHECK(!got.truncated);
    REQUIRE(got.neighbors.size() == static_cast<size_t>(k));
    for (size_t i = 0; i < want.size(); ++i) {
      CHECK(got.neighbors[i].phrase == want[i].phrase);
      CHECK(got.neighbors[i].distance == want[i].distance);
    }
    ++checked;
  }
  CHECK(checked >= 20);

  // Requesting more neighbors than the corpus offers reports truncation.
  const auto small = mine_phonetic_neighbors("good night", {"good night", "boy"}, 5, lex);
  CHECK(small.truncated);
  CHECK(small.neighbors.size() == 1);
}

TEST_CASE("semantic neighbors rank by cosine with ties on the word") {
  const auto got = mine_semantic_neighbors("night", demo_semantics(), 2);
  REQUIRE(got.size() == 2);
  CHECK(got[0].word == "day");
  CHECK(got[0].cosine == doctest::Approx(0.9 / std::sqrt(0.82)).epsilon(1e-12));
  CHECK(got[1].word == "dog");  // cos = 0.7/sqrt(0.98) ~ 0.707
  CHECK_THROWS_AS(mine_semantic_neighbors("martian", demo_semantics(), 2), Error);
}

TEST_CASE("word permutations enumerate distinct reorderings") {
  const auto perms = permute_words({"b", "a", "c"});
  REQUIRE(perms.size() == 5);  // 3! minus the original
  const std::vector<std::vector<std::string>> want = {
      {"a", "b", "c"}, {"a", "c", "b"}, {"b", "c", "a"},
      {"c", "a", "b"}, {"c", "b", "a"}};
  CHECK(perms == want);

  CHECK(permute_words({"x", "x"}).empty());  // duplicates collapse
  CHECK_THROWS_AS(permute_words({"solo"}), Error);

  const auto capped = permute_words({"a", "b", "c", "d", "e"});
  CHECK(capped.size() == static_cast<size_t>(kMaxPermutations));
}

TEST_CASE("confusable mining merges all three generators") {
  const Lexicon& lex = demo_lexicon();
  const std::vector<std::string> corpus = {"good night", "good light", "boy", "day bay"};
  const ConfusableSet set = mine_confusables("Good Night", corpus, demo_semantics(), 3, lex);
  CHECK(set.target == "good night");

  REQUIRE(!set.phonetic.empty());
  CHECK(set.phonetic[0].phrase == "good light");  // N AY T vs L AY T: distance 1
  CHECK(set.phonetic[0].distance == 1);

  // Per-word semantic neighbors of "good" and "night", merged and deduped.
  REQUIRE(!set.semantic.empty());
  CHECK(set.semantic[0].word == "day");
  for (size_t i = 1; i < set.semantic.size(); ++i)
    CHECK(set.semantic[i - 1].cosine >= set.semantic[i].cosine);

  CHECK(set.permutations == std::vector<std::string>({"night good"}));

  // A single-word target has no permutations but still mines the rest.
  const ConfusableSet solo = mine_confusables("dog", corpus, demo_semantics(), 2, lex);
  CHECK(solo.permutations.empty());
  CHECK(!solo.phonetic.empty());
}

TEST_CASE("rendering is a pure function of phonemes, seed, and profile") {
  RenderProfile profile;
  profile.feat_dim = 5;
  profile.corpus_seed = 9;
  const std::vector<int64_t> phonemes = {0, 3, 1};

  const FeatureMatrix a = render_synthetic_speech(phonemes, 42, profile);
  const FeatureMatrix b = render_synthetic_speech(phonemes, 42, profile);
  CHECK(a.frames.data == b.frames.data);
  CHECK(a.frames.shape == b.frames.shape);
  CHECK(a.frame_rate_hz == 100.0);

  const FeatureMatrix c = render_synthetic_speech(phonemes, 43, profile);
  CHECK(a.frames.data != c.frames.data);

  // Different prototype seeds relocate the phoneme prototypes.
  RenderProfile other = profile;
  other.corpus_seed = 10;
  const FeatureMatrix d = render_synthetic_speech(phonemes, 42, other);
  CHECK(a.frames.data != d.frames.data);
}

TEST_CASE("noiseless rendering emits prototype runs with bounded durations") {
  RenderProfile profile;
  profile.feat_dim = 4;
  profile.corpus_seed = 5;
  profile.noise_level = 0.0;
  profile.min_duration = 2;
  profile.max_duration = 5;
  const std::vector<int64_t> phonemes = {2, 7, 2};

  const FeatureMatrix f = render_synthetic_speech(phonemes, 11, profile);
  REQUIRE(f.f() == 4);
  CHECK(f.t() >= 3 * profile.min_duration);
  CHECK(f.t() <= 3 * profile.max_duration);

  // Decode the run-length structure: frames must be exact prototype copies,
  // in phoneme order, with per-phoneme run lengths inside the range.
  // Adjacent phonemes differ here, so each run boundary is observable.
  int64_t row = 0;
  for (int64_t ph = 0; ph < 3; ++ph) {
    const auto proto = phoneme_prototype(phonemes[static_cast<size_t>(ph)], profile);
    int64_t run = 0;
    while (row < f.t()) {
      bool match = true;
      for (int64_t j = 0; j < 4; ++j)
        match = match && f.frames.at(row, j) == proto[static_cast<size_t>(j)];
      if (!match) break;
      ++run;
      ++row;
    }
    CHECK(run >= profile.min_duration);
    CHECK(run <= profile.max_duration);
  }
  CHECK(row == f.t());  // every frame is some prototype copy

  // Nonzero noise perturbs every coordinate around the prototype.
  RenderProfile noisy = profile;
  noisy.noise_level = 0.1;
  const FeatureMatrix g = render_synthetic_speech(phonemes, 11, noisy);
  const auto proto0 = phoneme_prototype(2, profile);
  bool any_shift = false;
  for (int64_t j = 0; j < 4; ++j) any_shift |= (g.frames.at(0, j) != proto0[static_cast<size_t>(j)]);
  CHECK(any_shift);
}

TEST_CASE("prototypes are deterministic per phoneme id") {
  RenderProfile profile;
  profile.feat_dim = 6;
  CHECK(phoneme_prototype(3, profile) == phoneme_prototype(3, profile));
  CHECK(phoneme_prototype(3, profile) != phoneme_prototype(4, profile));
  CHECK_THROWS_AS(phoneme_prototype(-1, profile), Error);
  CHECK_THROWS_AS(render_synthetic_speech({}, 1, profile), Error);
}
