#include "mmkws/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "mmkws/error.hpp"
#include "mmkws/rng.hpp"

namespace mmkws {

Labels make_labels(const std::vector<std::string>& query_words, const Enrollment& enr,
                   const Lexicon& lexicon) {
  check(!query_words.empty(), "make_labels: empty query transcript");
  check(!enr.words.empty(), "make_labels: empty enrollment");
  for (const auto& w : query_words) {
    check(lexicon.contains(w), "make_labels: word not in lexicon: " + w);
  }
  for (const auto& w : enr.words) {
    check(lexicon.contains(w), "make_labels: word not in lexicon: " + w);
  }

  Labels out;
  out.label_utt = (query_words == enr.words) ? 1 : 0;

  const std::unordered_set<std::string> query_set(query_words.begin(), query_words.end());
  out.labels_text.reserve(enr.words.size());
  for (const auto& w : enr.words) {
    out.labels_text.push_back(query_set.count(w) > 0 ? 1.0 : 0.0);
  }

  // Multiset containment: each enrollment phoneme consumes one occurrence
  // from the transcript's phoneme sequence.
  std::unordered_map<int64_t, int64_t> avail;
  for (int64_t id : lexicon.phrase_ids(query_words)) ++avail[id];
  out.labels_phon.reserve(enr.phoneme_ids.size());
  for (int64_t id : enr.phoneme_ids) {
    auto it = avail.find(id);
    if (it != avail.end() && it->second > 0) {
      --it->second;
      out.labels_phon.push_back(1.0);
    } else {
      out.labels_phon.push_back(0.0);
    }
  }
  return out;
}

LossParts total_loss(Tape& tape, const MatchResult& result, const Labels& labels,
                     bool aux_losses) {
  check(labels.labels_phon.size() == static_cast<size_t>(result.p_phon->rows()),
        "total_loss: phoneme label count does not match prediction count");
  check(labels.labels_text.size() == static_cast<size_t>(result.p_text->rows()),
        "total_loss: word label count does not match prediction count");

  LossParts parts;
  parts.utt =
      tape.mean_all(tape.bce_loss(result.p_utt, {static_cast<double>(labels.label_utt)}));
  parts.phon = tape.mean_all(tape.bce_loss(result.p_phon, labels.labels_phon));
  parts.text = tape.mean_all(tape.bce_loss(result.p_text, labels.labels_text));
  if (aux_losses) {
    parts.total = tape.add(tape.add(parts.utt, parts.phon), parts.text);
  } else {
    parts.total = parts.utt;
  }
  return parts;
}

Adam::Adam(std::vector<TensorPtr> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  check(lr_ >= 0.0, "Adam: negative learning rate");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    check(p != nullptr, "Adam: null parameter");
    m_.emplace_back(p->numel(), 0.0);
    v_.emplace_back(p->numel(), 0.0);
  }
}

void Adam::step(const std::vector<std::vector<double>>& grads) {
  check(grads.size() == params_.size(), "Adam::step: gradient count does not match parameters");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    const std::vector<double>& g = grads[i];
    check(g.size() == static_cast<size_t>(p.numel()),
          "Adam::step: gradient size mismatch for parameter " + std::to_string(i));
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (size_t j = 0; j < g.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

LossRow train_step(const Model& model, Adam& opt, const std::vector<TrainingPair>& batch,
                   int64_t step, bool aux_losses) {
  check(!batch.empty(), "train_step: empty batch");
  const auto& params = opt.params();
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.emplace_back(p->numel(), 0.0);

  LossRow row;
  row.step = step;
  for (const auto& pair : batch) {
    Tape tape;
    const MatchResult result = model.score_pair(tape, pair.query, pair.enrollment);
    const LossParts parts = total_loss(tape, result, pair.labels, aux_losses);
    const double total = parts.total->data[0];
    if (!std::isfinite(total)) {
      std::string ids;
      for (const auto& p : batch) {
        if (!ids.empty()) ids += ", ";
        ids += p.id;
      }
      fail("train_step: non-finite loss at step " + std::to_string(step) + " (pair " + pair.id +
           "; batch: " + ids + ")");
    }
    row.utt += parts.utt->data[0];
    row.phon += parts.phon->data[0];
    row.text += parts.text->data[0];
    row.total += total;

    const GradTable gt = tape.backward(parts.total);
    for (size_t i = 0; i < params.size(); ++i) {
      const std::vector<double>* g = gt.find(params[i]);
      if (g == nullptr) continue;
      std::vector<double>& acc = grads[i];
      for (size_t j = 0; j < acc.size(); ++j) acc[j] += (*g)[j];
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  row.utt *= inv;
  row.phon *= inv;
  row.text *= inv;
  row.total *= inv;
  for (auto& g : grads) {
    for (double& x : g) x *= inv;
  }
  opt.step(grads);
  return row;
}

namespace {

Enrollment enroll_keyword(const TrainKeyword& kw, const RenderProfile& profile,
                          const Lexicon& lexicon, int64_t n_templates, uint64_t seed_base) {
  Enrollment enr;
  enr.words = kw.words;
  enr.subword_ids = kw.subword_ids;
  enr.phoneme_ids = kw.phoneme_ids;
  const std::vector<int64_t> phonemes = lexicon.phrase_ids(kw.words);
  for (int64_t t = 0; t < n_templates; ++t) {
    enr.templates.push_back(render_synthetic_speech(
        phonemes, mix_seed(seed_base, "template", static_cast<uint64_t>(t)), profile));
  }
  return enr;
}

TrainingPair make_pair(const std::string& id, const TrainKeyword& anchor,
                       const std::vector<std::string>& query_words, const TrainCorpus& corpus,
                       int64_t n_templates, uint64_t pair_seed) {
  TrainingPair pair;
  pair.id = id;
  pair.query_words = query_words;
  pair.query = render_synthetic_speech(corpus.lexicon->phrase_ids(query_words),
                                       mix_seed(pair_seed, "query"), corpus.profile);
  pair.enrollment = enroll_keyword(anchor, corpus.profile, *corpus.lexicon, n_templates,
                                   mix_seed(pair_seed, "enroll"));
  pair.labels = make_labels(query_words, pair.enrollment, *corpus.lexicon);
  return pair;
}

}  // namespace

TrainResult train(const Model& model, const TrainCorpus& corpus, const TrainConfig& tc) {
  check(corpus.lexicon != nullptr && corpus.vocab != nullptr,
        "train: corpus is missing its lexicon or vocabulary");
  check(corpus.keywords.size() >= 2, "train: need at least two keywords");
  check(tc.steps >= 0, "train: steps must not be negative");
  check(tc.anchors_per_step >= 1, "train: anchors_per_step must be positive");
  check(tc.template_dropout >= 0.0 && tc.template_dropout <= 1.0,
        "train: template_dropout must lie in [0, 1]");

  std::vector<TensorPtr> params;
  for (const auto& [name, p] : model.trainable_parameters()) params.push_back(p);
  Adam opt(params, tc.lr, tc.beta1, tc.beta2, tc.eps);

  const int64_t n = static_cast<int64_t>(corpus.keywords.size());
  Rng rng(mix_seed(tc.seed, "train"));
  TrainResult result;
  result.curve.reserve(static_cast<size_t>(tc.steps));

  for (int64_t step = 0; step < tc.steps; ++step) {
    std::vector<TrainingPair> batch;
    batch.reserve(static_cast<size_t>(tc.anchors_per_step) * 3);
    for (int64_t a = 0; a < tc.anchors_per_step; ++a) {
      const int64_t ai = rng.uniform_int(0, n - 1);
      const TrainKeyword& anchor = corpus.keywords[static_cast<size_t>(ai)];
      const std::string tag =
          "s" + std::to_string(step) + ".a" + std::to_string(a) + ".k" + std::to_string(ai);

      // A dropped-template pair trains the text-only enrollment path.
      int64_t n_templates = tc.use_templates ? tc.n_templates : 0;
      if (n_templates > 0 && rng.uniform() < tc.template_dropout) n_templates = 0;

      // Positive: the anchor spoken again, freshly rendered.
      batch.push_back(make_pair(tag + ".pos", anchor, anchor.words, corpus, n_templates,
                                rng.next_u64()));

      // Confusable negative: a mined neighbor phrase when available.
      std::vector<std::string> conf_words;
      if (tc.use_confusables && !anchor.confusables.empty()) {
        const int64_t ci =
            rng.uniform_int(0, static_cast<int64_t>(anchor.confusables.size()) - 1);
        conf_words = anchor.confusables[static_cast<size_t>(ci)];
      }
      if (conf_words.empty() || conf_words == anchor.words) {
        int64_t other = rng.uniform_int(0, n - 2);
        if (other >= ai) ++other;
        conf_words = corpus.keywords[static_cast<size_t>(other)].words;
      }
      batch.push_back(make_pair(tag + ".conf", anchor, conf_words, corpus, n_templates,
                                rng.next_u64()));

      // Random negative: some other keyword entirely.
      int64_t ri = rng.uniform_int(0, n - 2);
      if (ri >= ai) ++ri;
      batch.push_back(make_pair(tag + ".rand", anchor,
                                corpus.keywords[static_cast<size_t>(ri)].words, corpus,
                                n_templates, rng.next_u64()));
    }
    result.curve.push_back(train_step(model, opt, batch, step, tc.aux_losses));
  }
  return result;
}

std::string loss_curve_csv(const std::vector<LossRow>& curve) {
  std::string out = "step,loss_utt,loss_phon,loss_text,total\n";
  char line[160];
  for (const auto& row : curve) {
    std::snprintf(line, sizeof(line), "%lld,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<long long>(row.step), row.utt, row.phon, row.text, row.total);
    out += line;
  }
  return out;
}

TrainCorpus make_train_corpus(const CorpusManifest& manifest, const Lexicon& lexicon,
                              const Vocab& vocab) {
  TrainCorpus corpus;
  corpus.profile = manifest.spec.profile;
  corpus.lexicon = &lexicon;
  corpus.vocab = &vocab;
  for (const KeywordRecord& kw : manifest.train_keywords) {
    TrainKeyword tk;
    tk.words = kw.words;
    tk.subword_ids = vocab.encode(kw.words);
    tk.phoneme_ids = lexicon.phrase_ids(kw.words);
    tk.confusables = kw.confusables;
    corpus.keywords.push_back(std::move(tk));
  }
  return corpus;
}

nlohmann::json train_config_to_json(const TrainConfig& tc) {
  return nlohmann::json{{"steps", tc.steps},
                        {"anchors_per_step", tc.anchors_per_step},
                        {"lr", tc.lr},
                        {"seed", tc.seed},
                        {"n_templates", tc.n_templates},
                        {"template_dropout", tc.template_dropout},
                        {"use_templates", tc.use_templates},
                        {"aux_losses", tc.aux_losses},
                        {"use_confusables", tc.use_confusables},
                        {"beta1", tc.beta1},
                        {"beta2", tc.beta2},
                        {"eps", tc.eps}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig tc;
  tc.steps = j.at("steps").get<int64_t>();
  tc.anchors_per_step = j.at("anchors_per_step").get<int64_t>();
  tc.lr = j.at("lr").get<double>();
  tc.seed = j.at("seed").get<uint64_t>();
  tc.n_templates = j.at("n_templates").get<int64_t>();
  tc.template_dropout = j.at("template_dropout").get<double>();
  tc.use_templates = j.at("use_templates").get<bool>();
  tc.aux_losses = j.at("aux_losses").get<bool>();
  tc.use_confusables = j.at("use_confusables").get<bool>();
  tc.beta1 = j.at("beta1").get<double>();
  tc.beta2 = j.at("beta2").get<double>();
  tc.eps = j.at("eps").get<double>();
  return tc;
}

}  // namespace mmkws
