#include "mmkws/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "mmkws/error.hpp"

namespace mmkws {

std::string normalize_word(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    const unsigned char u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) out.push_back(static_cast<char>(std::tolower(u)));
  }
  return out;
}

std::vector<std::string> split_words(std::string_view phrase) {
  std::vector<std::string> words;
  std::string token;
  std::istringstream in{std::string(phrase)};
  while (in >> token) {
    std::string w = normalize_word(token);
    if (!w.empty()) words.push_back(std::move(w));
  }
  return words;
}

namespace {

// Deterministic letter-to-phoneme fallback covering a-z.
const std::vector<std::string>& fallback_for(char c) {
  static const std::map<char, std::vector<std::string>> table = {
      {'a', {"AE"}}, {'b', {"B"}},  {'c', {"K"}},  {'d', {"D"}},      {'e', {"EH"}},
      {'f', {"F"}},  {'g', {"G"}},  {'h', {"HH"}}, {'i', {"IH"}},     {'j', {"JH"}},
      {'k', {"K"}},  {'l', {"L"}},  {'m', {"M"}},  {'n', {"N"}},      {'o', {"AA"}},
      {'p', {"P"}},  {'q', {"K"}},  {'r', {"R"}},  {'s', {"S"}},      {'t', {"T"}},
      {'u', {"AH"}}, {'v', {"V"}},  {'w', {"W"}},  {'x', {"K", "S"}}, {'y', {"Y"}},
      {'z', {"Z"}},
  };
  static const std::vector<std::string> empty;
  auto it = table.find(c);
  return it == table.end() ? empty : it->second;
}

}  // namespace

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open lexicon file: " + path);
  Lexicon lex;
  std::set<std::string> symbols;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    check(tab != std::string::npos,
          "lexicon line " + std::to_string(lineno) + " has no tab separator");
    const std::string word = normalize_word(line.substr(0, tab));
    check(!word.empty(), "lexicon line " + std::to_string(lineno) + " has an empty word");
    std::vector<std::string> phones;
    std::istringstream ps(line.substr(tab + 1));
    std::string p;
    while (ps >> p) {
      symbols.insert(p);
      phones.push_back(std::move(p));
    }
    check(!phones.empty(), "lexicon entry for '" + word + "' has no phonemes");
    lex.entries_[word] = std::move(phones);
  }
  check(!lex.entries_.empty(), "lexicon file is empty: " + path);
  // Close the inventory over everything the fallback can emit.
  for (char c = 'a'; c <= 'z'; ++c)
    for (const auto& s : fallback_for(c)) symbols.insert(s);
  lex.inventory_.assign(symbols.begin(), symbols.end());
  for (size_t i = 0; i < lex.inventory_.size(); ++i)
    lex.symbol_ids_[lex.inventory_[i]] = static_cast<int64_t>(i);
  return lex;
}

std::vector<std::string> Lexicon::g2p(const std::string& word) const {
  check(!word.empty(), "g2p of an empty word");
  auto it = entries_.find(word);
  if (it != entries_.end()) return it->second;
  std::vector<std::string> phones;
  for (char c : word) {
    for (const auto& s : fallback_for(c)) phones.push_back(s);
  }
  check(!phones.empty(), "word '" + word + "' has no pronounceable letters");
  return phones;
}

int64_t Lexicon::symbol_id(const std::string& symbol) const {
  auto it = symbol_ids_.find(symbol);
  check(it != symbol_ids_.end(), "phoneme symbol not in inventory: " + symbol);
  return it->second;
}

std::vector<int64_t> Lexicon::g2p_ids(const std::string& word) const {
  std::vector<int64_t> ids;
  for (const auto& s : g2p(word)) ids.push_back(symbol_id(s));
  return ids;
}

std::vector<std::string> Lexicon::phrase_phonemes(const std::vector<std::string>& words) const {
  check(!words.empty(), "phrase has no words");
  std::vector<std::string> out;
  for (const auto& w : words) {
    auto p = g2p(w);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<int64_t> Lexicon::phrase_ids(const std::vector<std::string>& words) const {
  std::vector<int64_t> ids;
  for (const auto& s : phrase_phonemes(words)) ids.push_back(symbol_id(s));
  return ids;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open vocabulary file: " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    check(!line.empty(), "vocabulary contains an empty line");
    check(v.ids_.count(line) == 0, "duplicate vocabulary token: " + line);
    v.ids_[line] = static_cast<int64_t>(v.tokens_.size());
    v.tokens_.push_back(line);
  }
  check(!v.tokens_.empty(), "vocabulary file is empty: " + path);
  return v;
}

int64_t Vocab::id_of(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? 0 : it->second;
}

std::vector<int64_t> Vocab::encode(const std::vector<std::string>& words) const {
  check(!words.empty(), "cannot encode an empty word list");
  std::vector<int64_t> ids;
  for (const auto& w : words) ids.push_back(id_of(w));
  return ids;
}

SemanticTable SemanticTable::load(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open semantic vector file: " + path);
  SemanticTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> vec;
    double x;
    while (ls >> x) vec.push_back(x);
    check(!vec.empty(), "semantic line " + std::to_string(lineno) + " has no values");
    if (t.dim_ == 0) t.dim_ = static_cast<int64_t>(vec.size());
    check(static_cast<int64_t>(vec.size()) == t.dim_,
          "semantic line " + std::to_string(lineno) + " has inconsistent dimension");
    double norm2 = 0.0;
    for (double v : vec) norm2 += v * v;
    check(norm2 > 0.0, "semantic vector for '" + word + "' is zero");
    t.vectors_[normalize_word(word)] = std::move(vec);
  }
  check(!t.vectors_.empty(), "semantic vector file is empty: " + path);
  return t;
}

const std::vector<double>& SemanticTable::vector_of(const std::string& word) const {
  auto it = vectors_.find(word);
  check(it != vectors_.end(), "word not in semantic table: " + word);
  return it->second;
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  check(u.size() == v.size() && !u.empty(), "cosine of mismatched vectors");
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  check(uu > 0.0 && vv > 0.0, "cosine of a zero vector");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

}  // namespace mmkws
