#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmkws/corpus.hpp"
#include "mmkws/error.hpp"
#include "mmkws/io.hpp"
#include "mmkws/lexicon.hpp"
#include "mmkws/mining.hpp"
#include "mmkws/training.hpp"

using namespace mmkws;
using nlohmann::json;

namespace {

std::string tmp_path(const std::string& name) {
  return std::string(MMKWS_TEST_TMP_DIR) + "/" + name;
}

// A systematic consonant-vowel-consonant grid (8 x 3 x 3 = 72 words) where
// every word has many neighbors at phoneme distance 1 and 2, so hard-negative
// construction always has material to work with.
const Lexicon& grid_lexicon() {
  static const Lexicon lex = [] {
    const std::map<char, std::string> onset = {{'b', "B"}, {'d', "D"}, {'g', "G"}, {'k', "K"},
                                               {'l', "L"}, {'m', "M"}, {'n', "N"}, {'p', "P"}};
    const std::map<char, std::string> vowel = {{'a', "AA"}, {'i', "IY"}, {'u', "UW"}};
    const std::map<char, std::string> coda = {{'t', "T"}, {'n', "N"}, {'s', "S"}};
    std::string text;
    for (const auto& [c1, p1] : onset)
      for (const auto& [v, pv] : vowel)
        for (const auto& [c2, p2] : coda) {
          text += std::string{c1, v, c2};
          text += '\t';
          text += p1 + " " + pv + " " + p2 + "\n";
        }
    const std::string path = tmp_path("corpus_lexicon.tsv");
    io::write_text_file(path, text);
    return Lexicon::load(path);
  }();
  return lex;
}

const SemanticTable& grid_semantics() {
  static const SemanticTable table = [] {
    const std::string path = tmp_path("corpus_semantics.vec");
    io::write_text_file(path,
                        "bat 1 0\n"
                        "pat 0.9 0.1\n"
                        "mun 0 1\n"
                        "nun 0.1 0.9\n"
                        "kit 0.5 0.5\n"
                        "git 0.4 0.6\n");
    return SemanticTable::load(path);
  }();
  return table;
}

CorpusSpec small_spec() {
  CorpusSpec s;
  s.n_train_keywords = 10;
  s.n_test_keywords = 6;
  s.min_words = 2;
  s.max_words = 3;
  s.pos_per_keyword = 2;
  s.easy_per_keyword = 2;
  s.hard_per_keyword = 2;
  s.n_templates = 2;
  s.hard_distance = 2;
  s.mine_k = 6;
  s.seed = 5;
  s.profile.feat_dim = 6;
  s.profile.corpus_seed = 3;
  s.profile.noise_level = 0.05;
  s.profile.min_duration = 2;
  s.profile.max_duration = 3;
  return s;
}

// Built once; most cases below inspect this one corpus.
const CorpusManifest& small_corpus() {
  static const CorpusManifest m = [] {
    std::filesystem::remove_all(tmp_path("corpus_a"));
    return build_corpus(small_spec(), grid_lexicon(), grid_semantics(), tmp_path("corpus_a"));
  }();
  return m;
}

int64_t phrase_distance(const std::string& a, const std::string& b) {
  const Lexicon& lex = grid_lexicon();
  return phoneme_edit_distance(lex.phrase_ids(split_words(a)), lex.phrase_ids(split_words(b)));
}

std::vector<std::string> sorted_relative_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file())
      files.push_back(std::filesystem::relative(e.path(), dir).generic_string());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

TEST_CASE("spec json round trip preserves every field") {
  CorpusSpec s = small_spec();
  s.seed = 123456789;
  s.profile.noise_level = 0.25;
  CorpusSpec t = CorpusSpec::from_json(s.to_json());
  CHECK(t.to_json() == s.to_json());
  CHECK(t.seed == s.seed);
  CHECK(t.profile.noise_level == s.profile.noise_level);
}

TEST_CASE("spec validation rejects inconsistent sizes") {
  CorpusSpec s = small_spec();
  s.max_words = 1;  // < min_words
  CHECK_THROWS_AS(s.validate(), Error);
  s = small_spec();
  s.hard_per_keyword = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = small_spec();
  s.hard_distance = 0;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("train and test keyword sets are disjoint and complete") {
  const CorpusManifest& m = small_corpus();
  const CorpusSpec s = small_spec();
  REQUIRE(static_cast<int64_t>(m.train_keywords.size()) == s.n_train_keywords);
  REQUIRE(static_cast<int64_t>(m.test_keywords.size()) == s.n_test_keywords);

  std::set<std::string> train_texts, test_texts;
  for (const auto& kw : m.train_keywords) {
    CHECK(static_cast<int64_t>(kw.words.size()) >= s.min_words);
    CHECK(static_cast<int64_t>(kw.words.size()) <= s.max_words);
    train_texts.insert(join_words(kw.words));
  }
  for (const auto& kw : m.test_keywords) test_texts.insert(join_words(kw.words));
  CHECK(train_texts.size() == m.train_keywords.size());  // no duplicates
  CHECK(test_texts.size() == m.test_keywords.size());
  for (const auto& t : test_texts) CHECK(train_texts.count(t) == 0);
}

TEST_CASE("every test keyword gets positives, easy negatives, and hard negatives") {
  const CorpusManifest& m = small_corpus();
  const CorpusSpec s = small_spec();
  struct Counts {
    int64_t pos = 0, easy_neg = 0, hard_neg = 0;
  };
  std::map<std::string, Counts> by_kw;
  for (const auto& p : m.pairs) {
    Counts& c = by_kw[p.enroll_text];
    if (p.label == 1) {
      c.pos++;  // counted once per split row
    } else if (p.split == "easy") {
      c.easy_neg++;
    } else {
      c.hard_neg++;
    }
  }
  REQUIRE(static_cast<int64_t>(by_kw.size()) == s.n_test_keywords);
  for (const auto& [text, c] : by_kw) {
    CAPTURE(text);
    CHECK(c.pos == 2 * s.pos_per_keyword);  // each positive appears in both splits
    CHECK(c.easy_neg == s.easy_per_keyword);
    CHECK(c.hard_neg == s.hard_per_keyword);
  }
}

TEST_CASE("hard negatives sit in the confusable distance band, easy negatives outside it") {
  const CorpusManifest& m = small_corpus();
  const CorpusSpec s = small_spec();
  int64_t n_hard = 0, n_easy = 0;
  for (const auto& p : m.pairs) {
    const int64_t d = phrase_distance(p.query_text, p.enroll_text);
    if (p.label == 1) {
      CHECK(d == 0);
      CHECK(p.query_text == p.enroll_text);
    } else if (p.split == "hard") {
      CHECK(d >= 1);
      CHECK(d <= s.hard_distance);
      n_hard++;
    } else {
      REQUIRE(p.split == "easy");
      CHECK(d > s.hard_distance);
      n_easy++;
    }
  }
  CHECK(n_hard == s.n_test_keywords * s.hard_per_keyword);
  CHECK(n_easy == s.n_test_keywords * s.easy_per_keyword);
}

TEST_CASE("manifest rows carry exactly the documented fields") {
  std::istringstream in(io::read_text_file(tmp_path("corpus_a") + "/pairs.jsonl"));
  std::string line;
  REQUIRE(std::getline(in, line));
  json row = json::parse(line);
  std::set<std::string> keys;
  for (const auto& [k, v] : row.items()) keys.insert(k);
  CHECK(keys == std::set<std::string>{"pair_id", "query_feat", "query_text", "enroll_text",
                                      "n_templates", "label", "split"});
}

TEST_CASE("stored labels agree with the label function on every pair") {
  const CorpusManifest& m = small_corpus();
  const Lexicon& lex = grid_lexicon();
  std::set<std::string> ids;
  for (const auto& p : m.pairs) {
    CHECK(ids.insert(p.pair_id).second);  // pair ids unique
    Enrollment enr;
    enr.words = split_words(p.enroll_text);
    enr.phoneme_ids = lex.phrase_ids(enr.words);
    Labels lab = make_labels(split_words(p.query_text), enr, lex);
    CHECK(lab.label_utt == p.label);
  }
}

TEST_CASE("feature files exist, parse, and positives share one file across splits") {
  const CorpusManifest& m = small_corpus();
  const CorpusSpec s = small_spec();
  const std::string dir = tmp_path("corpus_a");

  std::map<std::string, std::vector<std::string>> rows_by_feat;
  for (const auto& p : m.pairs) {
    FeatureMatrix f = io::read_feat(dir + "/" + p.query_feat);
    CHECK(f.f() == s.profile.feat_dim);
    CHECK(f.t() > 0);
    CHECK(p.n_templates == s.n_templates);
    rows_by_feat[p.query_feat].push_back(p.split);
  }
  for (const auto& [feat, splits] : rows_by_feat) {
    if (splits.size() == 1) continue;
    // Only positives are listed twice: once per split.
    CHECK(splits.size() == 2);
    CHECK(std::set<std::string>(splits.begin(), splits.end()) ==
          std::set<std::string>{"easy", "hard"});
  }

  for (const auto& kw : m.test_keywords) {
    REQUIRE(static_cast<int64_t>(kw.template_feats.size()) == s.n_templates);
    for (const auto& rel : kw.template_feats) {
      FeatureMatrix f = io::read_feat(dir + "/" + rel);
      CHECK(f.f() == s.profile.feat_dim);
    }
  }
}

TEST_CASE("templates and positive queries come from different renderings") {
  const CorpusManifest& m = small_corpus();
  const std::string dir = tmp_path("corpus_a");
  for (const auto& kw : m.test_keywords) {
    std::string tmpl = io::read_text_file(dir + "/" + kw.template_feats[0]);
    for (const auto& p : m.pairs) {
      if (p.enroll_text != join_words(kw.words) || p.label != 1) continue;
      CHECK(io::read_text_file(dir + "/" + p.query_feat) != tmpl);
    }
  }
}

TEST_CASE("training confusables are close, deduplicated, and never test keywords") {
  const CorpusManifest& m = small_corpus();
  const CorpusSpec s = small_spec();
  std::set<std::string> test_texts;
  for (const auto& kw : m.test_keywords) test_texts.insert(join_words(kw.words));

  for (const auto& kw : m.train_keywords) {
    const std::string text = join_words(kw.words);
    CAPTURE(text);
    CHECK(!kw.confusables.empty());
    CHECK(static_cast<int64_t>(kw.confusables.size()) <= s.mine_k);
    std::set<std::string> seen;
    bool any_close = false;
    for (const auto& c : kw.confusables) {
      const std::string ct = join_words(c);
      CHECK(ct != text);
      CHECK(seen.insert(ct).second);
      CHECK(test_texts.count(ct) == 0);  // split purity
      if (phrase_distance(ct, text) <= s.hard_distance) any_close = true;
    }
    CHECK(any_close);
  }
}

TEST_CASE("rebuilding with the same spec is byte-identical, a new seed is not") {
  const CorpusManifest& a = small_corpus();
  (void)a;
  std::filesystem::remove_all(tmp_path("corpus_b"));
  build_corpus(small_spec(), grid_lexicon(), grid_semantics(), tmp_path("corpus_b"));

  auto files_a = sorted_relative_files(tmp_path("corpus_a"));
  auto files_b = sorted_relative_files(tmp_path("corpus_b"));
  REQUIRE(files_a == files_b);
  REQUIRE(!files_a.empty());
  for (const auto& rel : files_a) {
    CAPTURE(rel);
    CHECK(io::read_text_file(tmp_path("corpus_a") + "/" + rel) ==
          io::read_text_file(tmp_path("corpus_b") + "/" + rel));
  }

  CorpusSpec other = small_spec();
  other.seed = 6;
  std::filesystem::remove_all(tmp_path("corpus_c"));
  build_corpus(other, grid_lexicon(), grid_semantics(), tmp_path("corpus_c"));
  CHECK(io::read_text_file(tmp_path("corpus_a") + "/pairs.jsonl") !=
        io::read_text_file(tmp_path("corpus_c") + "/pairs.jsonl"));
}

TEST_CASE("loading a corpus directory reproduces the built manifest") {
  const CorpusManifest& m = small_corpus();
  CorpusManifest l = load_corpus(tmp_path("corpus_a"));
  CHECK(l.spec.to_json() == m.spec.to_json());
  REQUIRE(l.train_keywords.size() == m.train_keywords.size());
  REQUIRE(l.test_keywords.size() == m.test_keywords.size());
  REQUIRE(l.pairs.size() == m.pairs.size());
  for (size_t i = 0; i < m.train_keywords.size(); ++i) {
    CHECK(l.train_keywords[i].words == m.train_keywords[i].words);
    CHECK(l.train_keywords[i].confusables == m.train_keywords[i].confusables);
  }
  for (size_t i = 0; i < m.test_keywords.size(); ++i) {
    CHECK(l.test_keywords[i].words == m.test_keywords[i].words);
    CHECK(l.test_keywords[i].template_feats == m.test_keywords[i].template_feats);
  }
  for (size_t i = 0; i < m.pairs.size(); ++i) {
    CHECK(l.pairs[i].pair_id == m.pairs[i].pair_id);
    CHECK(l.pairs[i].query_feat == m.pairs[i].query_feat);
    CHECK(l.pairs[i].query_text == m.pairs[i].query_text);
    CHECK(l.pairs[i].enroll_text == m.pairs[i].enroll_text);
    CHECK(l.pairs[i].n_templates == m.pairs[i].n_templates);
    CHECK(l.pairs[i].label == m.pairs[i].label);
    CHECK(l.pairs[i].split == m.pairs[i].split);
  }
}

TEST_CASE("meta.json records the spec hash") {
  json meta = json::parse(io::read_text_file(tmp_path("corpus_a") + "/meta.json"));
  CHECK(meta.at("config_hash").get<std::string>() == io::config_hash(small_spec().to_json()));
  CHECK(meta.at("counts").at("pairs").get<size_t>() == small_corpus().pairs.size());
}

TEST_CASE("a lexicon without close word pairs cannot satisfy the hard-negative band") {
  const std::string path = tmp_path("corpus_sparse_lexicon.tsv");
  io::write_text_file(path,
                      "alpha\tAA L P AA\n"
                      "sssss\tS S S S S\n");
  Lexicon sparse = Lexicon::load(path);
  CorpusSpec s = small_spec();
  s.n_train_keywords = 1;
  s.n_test_keywords = 1;
  s.min_words = 2;
  s.max_words = 2;
  s.hard_per_keyword = 1;
  std::filesystem::remove_all(tmp_path("corpus_sparse"));
  CHECK_THROWS_WITH_AS(
      build_corpus(s, sparse, grid_semantics(), tmp_path("corpus_sparse")),
      doctest::Contains("vocabulary too small"), Error);
}

TEST_CASE("multiclass episodes split targets from unknowns and are reproducible") {
  const CorpusManifest& m = small_corpus();
  const Lexicon& lex = grid_lexicon();
  Episode ep = build_multiclass_episode(m, lex, 3, 2, 2, 11);
  REQUIRE(ep.targets.size() == 3);
  REQUIRE(ep.unknowns.size() == 2);
  REQUIRE(ep.queries.size() == (3 + 2) * 2);

  std::set<std::string> target_texts, unknown_texts;
  for (const auto& w : ep.targets) target_texts.insert(join_words(w));
  for (const auto& w : ep.unknowns) unknown_texts.insert(join_words(w));
  CHECK(target_texts.size() == 3);
  CHECK(unknown_texts.size() == 2);
  for (const auto& t : target_texts) CHECK(unknown_texts.count(t) == 0);

  for (const auto& q : ep.queries) {
    if (q.target_index >= 0) {
      REQUIRE(q.target_index < 3);
      CHECK(q.words == ep.targets[static_cast<size_t>(q.target_index)]);
    } else {
      CHECK(unknown_texts.count(join_words(q.words)) == 1);
    }
    CHECK(q.features.t() > 0);
    CHECK(q.features.f() == m.spec.profile.feat_dim);
  }

  Episode ep2 = build_multiclass_episode(m, lex, 3, 2, 2, 11);
  REQUIRE(ep2.queries.size() == ep.queries.size());
  CHECK(ep2.targets == ep.targets);
  for (size_t i = 0; i < ep.queries.size(); ++i) {
    CHECK(ep2.queries[i].words == ep.queries[i].words);
    CHECK(ep2.queries[i].target_index == ep.queries[i].target_index);
    CHECK(ep2.queries[i].features.frames.data == ep.queries[i].features.frames.data);
  }

  Episode ep3 = build_multiclass_episode(m, lex, 3, 2, 2, 12);
  bool differs = ep3.targets != ep.targets;
  for (size_t i = 0; !differs && i < ep.queries.size(); ++i)
    differs = ep3.queries[i].features.frames.data != ep.queries[i].features.frames.data;
  CHECK(differs);
}

TEST_CASE("episodes refuse to draw more keywords than the corpus holds") {
  const CorpusManifest& m = small_corpus();  // 6 test keywords
  CHECK_THROWS_WITH_AS(build_multiclass_episode(m, grid_lexicon(), 5, 5, 1, 1),
                       doctest::Contains("episode: needs"), Error);
}
