#include "mmkws/pipeline.hpp"

#include "mmkws/error.hpp"
#include "mmkws/io.hpp"

namespace mmkws {

using nlohmann::json;

CorpusManifest synth_corpus(const CorpusSpec& spec, const std::string& lexicon_path,
                            const std::string& vocab_path, const std::string& semantics_path,
                            const std::string& out_dir) {
  Lexicon lexicon = Lexicon::load(lexicon_path);
  Vocab vocab = Vocab::load(vocab_path);  // fail before writing anything
  (void)vocab;
  SemanticTable semantics;
  if (!semantics_path.empty()) semantics = SemanticTable::load(semantics_path);

  CorpusManifest manifest = build_corpus(spec, lexicon, semantics, out_dir);
  io::write_text_file(out_dir + "/lexicon.tsv", io::read_text_file(lexicon_path));
  io::write_text_file(out_dir + "/vocab.txt", io::read_text_file(vocab_path));
  if (!semantics_path.empty())
    io::write_text_file(out_dir + "/semantics.vec", io::read_text_file(semantics_path));
  return manifest;
}

CorpusBundle open_corpus(const std::string& dir) {
  check(io::file_exists(dir + "/meta.json"), "open_corpus: no corpus at " + dir);
  return CorpusBundle{load_corpus(dir), Lexicon::load(dir + "/lexicon.tsv"),
                      Vocab::load(dir + "/vocab.txt"), dir};
}

void save_model(const std::string& path, const Model& model, const json& train_info) {
  json config;
  config["model"] = model.config().to_json();
  config["train"] = train_info;
  config["config_hash"] = io::config_hash(config["model"]);
  io::save_checkpoint(path, config, model.parameters());
}

Model load_model(const std::string& path) {
  io::Checkpoint ck = io::load_checkpoint(path);
  Model model(ModelConfig::from_json(ck.config.at("model")));
  model.load_values(ck.tensors);
  return model;
}

std::vector<std::string> config_conflicts(const ModelConfig& cfg, const CorpusBundle& bundle) {
  std::vector<std::string> out;
  auto expect = [&out](const std::string& what, int64_t got, int64_t want) {
    if (got != want)
      out.push_back(what + ": checkpoint has " + std::to_string(got) + ", corpus implies " +
                    std::to_string(want));
  };
  expect("feat_dim", cfg.feat_dim, bundle.manifest.spec.profile.feat_dim);
  expect("n_phonemes", cfg.n_phonemes, bundle.lexicon.inventory_size());
  expect("n_subwords", cfg.n_subwords, bundle.vocab.size());
  return out;
}

TrainResult run_training(const CorpusBundle& bundle, const ModelConfig& mc, const TrainConfig& tc,
                         const std::string& out_dir) {
  mc.validate();
  Model model(mc);
  TrainCorpus corpus = make_train_corpus(bundle.manifest, bundle.lexicon, bundle.vocab);
  TrainResult result = train(model, corpus, tc);

  io::ensure_dir(out_dir);
  const json train_info = train_config_to_json(tc);
  save_model(out_dir + "/checkpoint.mmkw", model, train_info);
  io::write_text_file(out_dir + "/loss.csv", loss_curve_csv(result.curve));

  json resolved;
  resolved["model"] = mc.to_json();
  resolved["train"] = train_info;
  resolved["config_hash"] = io::config_hash(resolved["model"]);
  io::write_text_file(out_dir + "/train_config.json", resolved.dump(2) + "\n");
  return result;
}

EvalReport run_evaluation(const Model& model, const CorpusBundle& bundle, const EvalOptions& opts,
                          const std::string& report_path) {
  EvalReport rep = evaluate(model, bundle.manifest, bundle.dir, bundle.lexicon, bundle.vocab, opts);
  if (!report_path.empty()) io::write_text_file(report_path, rep.to_json().dump(2) + "\n");
  return rep;
}

}  // namespace mmkws
