// Command-line front end: data synthesis, confusable mining, training,
// evaluation, single-pair spotting, attention export, and benchmarking.
// Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mmkws/corpus.hpp"
#include "mmkws/error.hpp"
#include "mmkws/evaluation.hpp"
#include "mmkws/features.hpp"
#include "mmkws/rng.hpp"
#include "mmkws/io.hpp"
#include "mmkws/lexicon.hpp"
#include "mmkws/mining.hpp"
#include "mmkws/model.hpp"
#include "mmkws/pipeline.hpp"
#include "mmkws/training.hpp"

using namespace mmkws;
using nlohmann::json;

namespace {

// Every option can also come from the environment (MMKWS_ prefix mirrors the
// flag name) or from a --config key=value file; flags win over both.
CLI::Option* with_env(CLI::Option* opt, const std::string& flag) {
  std::string env = "MMKWS_";
  for (char c : flag.substr(2)) env += c == '-' ? '_' : static_cast<char>(std::toupper(c));
  return opt->envname(env);
}

template <typename T>
CLI::Option* add_opt(CLI::App* cmd, const std::string& flag, T& var, const std::string& desc) {
  return with_env(cmd->add_option(flag, var, desc), flag);
}

CLI::Option* add_flag(CLI::App* cmd, const std::string& flag, bool& var,
                      const std::string& desc) {
  return with_env(cmd->add_flag(flag, var, desc), flag);
}

void apply_threads(int64_t threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(static_cast<int>(threads));
#else
  (void)threads;
#endif
}

// ---- key=value config files ----
//
// `train --config file` reads defaults from a flat key=value file whose keys
// are the long option names without the leading dashes (steps=500, lr=0.01,
// no-aux=true). Values from the file are applied before parsing, so
// environment variables and flags override them: file < env < flag.

using KvList = std::vector<std::pair<std::string, std::string>>;

KvList parse_kv_file(const std::string& path) {
  KvList out;
  std::istringstream in(io::read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = CLI::detail::trim_copy(line);
    if (s.empty() || s[0] == '#') continue;
    const std::size_t eq = s.find('=');
    check(eq != std::string::npos, "config file " + path + " line " + std::to_string(lineno) +
                                       ": expected key=value, got '" + s + "'");
    const std::string key = CLI::detail::trim_copy(s.substr(0, eq));
    std::string val = CLI::detail::trim_copy(s.substr(eq + 1));
    if (val.size() >= 2 && ((val.front() == '"' && val.back() == '"') ||
                            (val.front() == '\'' && val.back() == '\'')))
      val = val.substr(1, val.size() - 2);
    check(!key.empty(), "config file " + path + " line " + std::to_string(lineno) +
                            ": empty key");
    out.emplace_back(key, val);
  }
  return out;
}

// The --config path has to be known before CLI11 parses, so it is scanned out
// of argv (falling back to MMKWS_CONFIG) rather than read from a parsed flag.
std::string preparse_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  const char* env = std::getenv("MMKWS_CONFIG");
  return env != nullptr ? std::string(env) : std::string();
}

// The resolved-config record every command echoes before doing work.
void echo_config(const std::string& command, json resolved) {
  resolved["command"] = command;
  std::cout << "config " << resolved.dump() << "\n";
  std::cout << "config_hash " << io::config_hash(resolved) << "\n";
}

ModelConfig model_config_for(const CorpusBundle& bundle) {
  ModelConfig mc;
  mc.feat_dim = bundle.manifest.spec.profile.feat_dim;
  mc.n_phonemes = bundle.lexicon.inventory_size();
  mc.n_subwords = bundle.vocab.size();
  return mc;
}

// ---- synth ----

void add_synth(CLI::App& app, std::function<int()>& run) {
  CLI::App* cmd = app.add_subcommand("synth", "generate a synthetic keyword corpus");
  auto spec = std::make_shared<CorpusSpec>();
  auto lexicon = std::make_shared<std::string>();
  auto vocab = std::make_shared<std::string>();
  auto semantics = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();

  add_opt(cmd, "--lexicon", *lexicon, "pronunciation dictionary (word<TAB>PH PH ...)")
      ->required();
  add_opt(cmd, "--vocab", *vocab, "subword vocabulary, one token per line")->required();
  add_opt(cmd, "--out", *out, "output corpus directory")->required();
  add_opt(cmd, "--semantic-table", *semantics, "word vector table for semantic confusables");
  add_opt(cmd, "--seed", spec->seed, "corpus sampling seed");
  add_opt(cmd, "--n-train", spec->n_train_keywords, "training keywords");
  add_opt(cmd, "--n-test", spec->n_test_keywords, "test keywords");
  add_opt(cmd, "--min-words", spec->min_words, "minimum words per keyword");
  add_opt(cmd, "--max-words", spec->max_words, "maximum words per keyword");
  add_opt(cmd, "--pos", spec->pos_per_keyword, "positive queries per test keyword");
  add_opt(cmd, "--easy", spec->easy_per_keyword, "easy negatives per test keyword");
  add_opt(cmd, "--hard", spec->hard_per_keyword, "hard negatives per test keyword");
  add_opt(cmd, "--templates", spec->n_templates, "speech templates per test keyword");
  add_opt(cmd, "--hard-distance", spec->hard_distance, "max phoneme distance of hard negatives");
  add_opt(cmd, "--mine-k", spec->mine_k, "confusables mined per training keyword");
  add_opt(cmd, "--feat-dim", spec->profile.feat_dim, "feature bins per frame");
  add_opt(cmd, "--noise", spec->profile.noise_level, "rendering noise level");
  add_opt(cmd, "--min-dur", spec->profile.min_duration, "min frames per phoneme");
  add_opt(cmd, "--max-dur", spec->profile.max_duration, "max frames per phoneme");
  add_opt(cmd, "--corpus-seed", spec->profile.corpus_seed, "phoneme prototype seed");

  cmd->callback([=, &run] {
    run = [=] {
      json resolved = spec->to_json();
      resolved["lexicon"] = *lexicon;
      resolved["vocab"] = *vocab;
      resolved["semantic_table"] = *semantics;
      resolved["out"] = *out;
      echo_config("synth", resolved);

      CorpusManifest m = synth_corpus(*spec, *lexicon, *vocab, *semantics, *out);
      std::cout << "train_keywords " << m.train_keywords.size() << "\n";
      std::cout << "test_keywords " << m.test_keywords.size() << "\n";
      std::cout << "pairs " << m.pairs.size() << "\n";
      std::cout << "wrote " << *out << "\n";
      return 0;
    };
  });
}

// ---- mine ----

void add_mine(CLI::App& app, std::function<int()>& run) {
  CLI::App* cmd = app.add_subcommand("mine", "mine confusable phrases for one target keyword");
  auto target = std::make_shared<std::string>();
  auto corpus_path = std::make_shared<std::string>();
  auto lexicon_path = std::make_shared<std::string>();
  auto semantics_path = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto k = std::make_shared<int64_t>(10);

  add_opt(cmd, "--target", *target, "target keyword phrase")->required();
  add_opt(cmd, "--corpus", *corpus_path, "candidate phrases, one per line")->required();
  add_opt(cmd, "--lexicon", *lexicon_path, "pronunciation dictionary")->required();
  add_opt(cmd, "--out", *out, "output JSONL file")->required();
  add_opt(cmd, "--k", *k, "neighbors per channel");
  add_opt(cmd, "--semantic-table", *semantics_path, "word vector table");

  cmd->callback([=, &run] {
    run = [=] {
      json resolved{{"target", *target},
                    {"corpus", *corpus_path},
                    {"lexicon", *lexicon_path},
                    {"semantic_table", *semantics_path},
                    {"out", *out},
                    {"k", *k}};
      echo_config("mine", resolved);

      Lexicon lexicon = Lexicon::load(*lexicon_path);
      SemanticTable table;
      if (!semantics_path->empty()) table = SemanticTable::load(*semantics_path);

      std::vector<std::string> corpus;
      std::istringstream in(io::read_text_file(*corpus_path));
      std::string line;
      while (std::getline(in, line)) {
        std::vector<std::string> words = split_words(line);
        if (!words.empty()) corpus.push_back(join_words(words));
      }
      check(!corpus.empty(), "mine: candidate corpus file has no phrases");

      const std::vector<std::string> target_words = split_words(*target);
      check(!target_words.empty(), "mine: empty target phrase");
      bool any_semantic = false;
      for (const std::string& w : target_words)
        if (table.contains(w)) any_semantic = true;
      if (!any_semantic)
        std::cerr << "warning: no target word is in the semantic table; semantic section will "
                     "be empty\n";

      ConfusableSet set = mine_confusables(join_words(target_words), corpus, table, *k, lexicon);

      std::string lines;
      json header{{"kind", "config"}, {"config", resolved}, {"config_hash",
                   io::config_hash(resolved)}};
      lines += header.dump() + "\n";
      for (const PhoneticNeighbor& n : set.phonetic)
        lines += json{{"kind", "phonetic"}, {"phrase", n.phrase}, {"distance", n.distance}}
                     .dump() + "\n";
      for (const SemanticNeighbor& n : set.semantic)
        lines += json{{"kind", "semantic"}, {"word", n.word}, {"cosine", n.cosine}}.dump() + "\n";
      for (const std::string& p : set.permutations)
        lines += json{{"kind", "permutation"}, {"phrase", p}}.dump() + "\n";
      io::write_text_file(*out, lines);

      std::cout << "phonetic " << set.phonetic.size() << "\n";
      std::cout << "semantic " << set.semantic.size() << "\n";
      std::cout << "permutations " << set.permutations.size() << "\n";
      std::cout << "wrote " << *out << "\n";
      return 0;
    };
  });
}

// ---- train ----

struct TrainFlags {
  std::string data, out, config_path;
  TrainConfig tc;
  ModelConfig mc;  // feat_dim / n_phonemes / n_subwords filled from the corpus
  bool no_aux = false, no_confusables = false, no_templates = false, unfreeze_support = false;
  int64_t threads = 0;
};

void add_train(CLI::App& app, std::function<int()>& run, const KvList& file_cfg) {
  CLI::App* cmd = app.add_subcommand("train", "train a model on a synthesized corpus");
  auto f = std::make_shared<TrainFlags>();

  // Register an option and remember how to fill its variable from a config
  // file string. File values are applied right after registration, before
  // CLI11 parses env vars and flags, which keeps file < env < flag.
  std::map<std::string, std::function<void(const std::string&)>> setters;
  auto remember = [&setters, f](const std::string& flag, auto* var) {
    const std::string key = flag.substr(2);
    setters[key] = [f, var, key](const std::string& s) {
      check(CLI::detail::lexical_cast(s, *var),
            "config file: bad value '" + s + "' for key '" + key + "'");
    };
  };
  auto reg = [&](const std::string& flag, auto& var, const std::string& desc) {
    remember(flag, &var);
    return add_opt(cmd, flag, var, desc);
  };
  auto reg_flag = [&](const std::string& flag, bool& var, const std::string& desc) {
    remember(flag, &var);
    return add_flag(cmd, flag, var, desc);
  };

  add_opt(cmd, "--config", f->config_path,
          "key=value defaults file; MMKWS_* variables and flags override it");
  reg("--data", f->data, "corpus directory from `synth`");
  reg("--out", f->out, "output directory for checkpoint and logs");
  reg("--steps", f->tc.steps, "optimizer steps");
  reg("--anchors", f->tc.anchors_per_step, "anchor keywords per step");
  reg("--lr", f->tc.lr, "Adam learning rate");
  reg("--seed", f->tc.seed, "training seed (also initializes parameters)");
  reg("--templates", f->tc.n_templates, "speech templates per training pair");
  reg("--dropout", f->tc.template_dropout, "chance a pair trains without templates");
  reg_flag("--no-aux", f->no_aux, "drop the phoneme/word auxiliary losses");
  reg_flag("--no-confusables", f->no_confusables, "replace mined negatives with random");
  reg_flag("--no-templates", f->no_templates, "never attach speech templates");
  reg_flag("--unfreeze-support", f->unfreeze_support, "train the support speech encoder");
  reg("--d", f->mc.d, "common embedding width");
  reg("--subsample", f->mc.subsample, "temporal subsampling of audio");
  reg("--enc-layers", f->mc.enc_layers, "audio encoder layers");
  reg("--enc-heads", f->mc.enc_heads, "audio encoder heads");
  reg("--d-phon", f->mc.d_phon, "raw phoneme embedding width");
  reg("--d-text", f->mc.d_text, "raw subword embedding width");
  reg("--qtam-layers", f->mc.qtam_layers, "text-matching attention layers");
  reg("--qtam-heads", f->mc.qtam_heads, "text-matching attention heads");
  reg("--qaam-layers", f->mc.qaam_layers, "audio-matching attention layers");
  reg("--qaam-heads", f->mc.qaam_heads, "audio-matching attention heads");
  reg("--gru-hidden", f->mc.gru_hidden, "summarizer GRU width");
  reg("--threads", f->threads, "cap worker threads (0 = library default)");

  for (const auto& [key, value] : file_cfg) {
    auto it = setters.find(key);
    check(it != setters.end(), "config file: unknown key '" + key + "'");
    it->second(value);
  }

  cmd->callback([f, &run] {
    if (f->data.empty()) throw CLI::RequiredError("train --data");
    if (f->out.empty()) throw CLI::RequiredError("train --out");
    run = [f] {
      apply_threads(f->threads);
      CorpusBundle bundle = open_corpus(f->data);
      ModelConfig mc = f->mc;
      ModelConfig derived = model_config_for(bundle);
      mc.feat_dim = derived.feat_dim;
      mc.n_phonemes = derived.n_phonemes;
      mc.n_subwords = derived.n_subwords;
      mc.freeze_support_speech = !f->unfreeze_support;
      mc.seed = f->tc.seed;

      TrainConfig tc = f->tc;
      tc.aux_losses = !f->no_aux;
      tc.use_confusables = !f->no_confusables;
      tc.use_templates = !f->no_templates;

      json resolved;
      resolved["model"] = mc.to_json();
      resolved["train"] = train_config_to_json(tc);
      resolved["data"] = f->data;
      resolved["out"] = f->out;
      resolved["config_file"] = f->config_path;
      echo_config("train", resolved);

      TrainResult result = run_training(bundle, mc, tc, f->out);
      if (!result.curve.empty()) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "final_loss %.6f\n", result.curve.back().total);
        std::cout << buf;
      }
      std::cout << "wrote " << f->out << "/checkpoint.mmkw\n";
      return 0;
    };
  });
}

// ---- eval ----

struct EvalFlags {
  std::string ckpt, data, report;
  EvalOptions opts;
  bool force = false;
  int64_t threads = 0;
};

void add_eval(CLI::App& app, std::function<int()>& run) {
  CLI::App* cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  auto f = std::make_shared<EvalFlags>();

  add_opt(cmd, "--ckpt", f->ckpt, "checkpoint file")->required();
  add_opt(cmd, "--data", f->data, "corpus directory")->required();
  add_opt(cmd, "--report", f->report, "output JSON report path")->required();
  add_flag(cmd, "--force", f->force, "evaluate despite architecture/corpus conflicts");
  add_opt(cmd, "--targets", f->opts.n_targets, "episode target keywords");
  add_opt(cmd, "--unknowns", f->opts.n_unknown, "episode unknown keywords");
  add_opt(cmd, "--queries-per-keyword", f->opts.queries_per_keyword, "episode queries each");
  add_opt(cmd, "--episode-templates", f->opts.episode_templates, "templates per episode target");
  add_opt(cmd, "--episode-seed", f->opts.episode_seed, "episode sampling seed");
  add_opt(cmd, "--threads", f->threads, "cap worker threads (0 = library default)");

  cmd->callback([f, &run] {
    run = [f] {
      apply_threads(f->threads);
      Model model = load_model(f->ckpt);
      CorpusBundle bundle = open_corpus(f->data);

      const std::vector<std::string> conflicts = config_conflicts(model.config(), bundle);
      if (!conflicts.empty() && !f->force) {
        for (const std::string& c : conflicts) std::cerr << "config conflict: " << c << "\n";
        fail("checkpoint architecture conflicts with the corpus (use --force to override)");
      }

      json resolved;
      resolved["model"] = model.config().to_json();
      resolved["ckpt"] = f->ckpt;
      resolved["data"] = f->data;
      resolved["report"] = f->report;
      resolved["force"] = f->force;
      resolved["episode"] = json{{"targets", f->opts.n_targets},
                                 {"unknowns", f->opts.n_unknown},
                                 {"queries_per_keyword", f->opts.queries_per_keyword},
                                 {"templates", f->opts.episode_templates},
                                 {"seed", f->opts.episode_seed}};
      echo_config("eval", resolved);

      EvalReport rep = run_evaluation(model, bundle, f->opts, f->report);
      std::cout << rep.to_json().dump(2) << "\n";
      std::cout << "wrote " << f->report << "\n";
      return 0;
    };
  });
}

// ---- spot ----

struct SpotFlags {
  std::string ckpt, keyword, query, lexicon, vocab;
  std::vector<std::string> templates;
  double threshold = 0.5;
};

void add_spot(CLI::App& app, std::function<int()>& run) {
  CLI::App* cmd = app.add_subcommand("spot", "score one query against one enrolled keyword");
  auto f = std::make_shared<SpotFlags>();

  add_opt(cmd, "--ckpt", f->ckpt, "checkpoint file")->required();
  add_opt(cmd, "--keyword", f->keyword, "keyword phrase to enroll")->required();
  add_opt(cmd, "--query", f->query, "query feature file (.feat)")->required();
  add_opt(cmd, "--lexicon", f->lexicon, "pronunciation dictionary")->required();
  add_opt(cmd, "--vocab", f->vocab, "subword vocabulary")->required();
  add_opt(cmd, "--templates", f->templates, "speech template feature files");
  add_opt(cmd, "--threshold", f->threshold, "YES/NO decision threshold");

  cmd->callback([f, &run] {
    run = [f] {
      json resolved{{"ckpt", f->ckpt},       {"keyword", f->keyword},
                    {"query", f->query},     {"lexicon", f->lexicon},
                    {"vocab", f->vocab},     {"templates", f->templates},
                    {"threshold", f->threshold}};
      echo_config("spot", resolved);

      Model model = load_model(f->ckpt);
      Lexicon lexicon = Lexicon::load(f->lexicon);
      Vocab vocab = Vocab::load(f->vocab);
      std::vector<FeatureMatrix> templates;
      for (const std::string& t : f->templates) templates.push_back(io::read_feat(t));
      Enrollment enr =
          make_enrollment(split_words(f->keyword), lexicon, vocab, std::move(templates));
      const double p = score_probability(model, io::read_feat(f->query), enr);

      char buf[64];
      std::snprintf(buf, sizeof(buf), "p_utt %.6f\n", p);
      std::cout << buf << (p >= f->threshold ? "YES" : "NO") << "\n";
      return 0;
    };
  });
}

// ---- export-attn ----

void add_export_attn(CLI::App& app, std::function<int()>& run) {
  CLI::App* cmd =
      app.add_subcommand("export-attn", "dump attention maps for one corpus pair");
  auto ckpt = std::make_shared<std::string>();
  auto data = std::make_shared<std::string>();
  auto pair_id = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();

  add_opt(cmd, "--ckpt", *ckpt, "checkpoint file")->required();
  add_opt(cmd, "--data", *data, "corpus directory")->required();
  add_opt(cmd, "--pair", *pair_id, "pair id from pairs.jsonl")->required();
  add_opt(cmd, "--out", *out, "output .attn file")->required();

  cmd->callback([=, &run] {
    run = [=] {
      json resolved{{"ckpt", *ckpt}, {"data", *data}, {"pair", *pair_id}, {"out", *out}};
      echo_config("export-attn", resolved);

      Model model = load_model(*ckpt);
      CorpusBundle bundle = open_corpus(*data);

      const PairRecord* pair = nullptr;
      for (const PairRecord& p : bundle.manifest.pairs)
        if (p.pair_id == *pair_id) pair = &p;
      check(pair != nullptr, "export-attn: no pair '" + *pair_id + "' in " + *data);

      const KeywordRecord* kw = nullptr;
      for (const KeywordRecord& k : bundle.manifest.test_keywords)
        if (join_words(k.words) == pair->enroll_text) kw = &k;
      check(kw != nullptr, "export-attn: pair enrolls unknown keyword");

      std::vector<FeatureMatrix> templates;
      for (const std::string& rel : kw->template_feats)
        templates.push_back(io::read_feat(bundle.dir + "/" + rel));
      Enrollment enr =
          make_enrollment(kw->words, bundle.lexicon, bundle.vocab, std::move(templates));

      Tape tape;
      MatchResult res =
          model.score_pair(tape, io::read_feat(bundle.dir + "/" + pair->query_feat), enr);

      // Text-matching maps first; audio-matching maps follow with their layer
      // index offset past the text-matching stack.
      std::vector<io::AttnBlock> blocks;
      for (const AttnMapRef& m : res.qtam_maps)
        blocks.push_back(io::AttnBlock{m.layer, m.head, *m.map});
      for (const AttnMapRef& m : res.qaam_maps)
        blocks.push_back(io::AttnBlock{
            static_cast<int32_t>(m.layer + model.config().qtam_layers), m.head, *m.map});
      io::write_attn(*out, blocks);
      std::cout << "blocks " << blocks.size() << "\n";
      std::cout << "wrote " << *out << "\n";
      return 0;
    };
  });
}

// ---- bench ----

void add_bench(CLI::App& app, std::function<int()>& run) {
  CLI::App* cmd = app.add_subcommand("bench", "time single-pair scoring");
  auto ckpt = std::make_shared<std::string>();
  auto reps = std::make_shared<int64_t>(100);
  auto seed = std::make_shared<uint64_t>(7);
  auto threads = std::make_shared<int64_t>(0);

  add_opt(cmd, "--ckpt", *ckpt, "checkpoint file")->required();
  add_opt(cmd, "--reps", *reps, "timed repetitions (after 10 warmup runs)");
  add_opt(cmd, "--seed", *seed, "seed for the synthetic probe pair");
  add_opt(cmd, "--threads", *threads, "cap worker threads (0 = library default)");

  cmd->callback([=, &run] {
    run = [=] {
      apply_threads(*threads);
      json resolved{{"ckpt", *ckpt}, {"reps", *reps}, {"seed", *seed}, {"threads", *threads}};
      echo_config("bench", resolved);

      Model model = load_model(*ckpt);
      const ModelConfig& cfg = model.config();

      // Synthetic probe derived from the architecture itself.
      RenderProfile profile;
      profile.feat_dim = cfg.feat_dim;
      std::vector<int64_t> phonemes;
      for (int64_t i = 0; i < std::min<int64_t>(8, cfg.n_phonemes); ++i) phonemes.push_back(i);
      Enrollment enr;
      enr.words = {"probe"};
      enr.phoneme_ids = phonemes;
      enr.subword_ids = {0};
      enr.templates.push_back(render_synthetic_speech(phonemes, mix_seed(*seed, "bench.tmpl"),
                                                      profile));
      FeatureMatrix query =
          render_synthetic_speech(phonemes, mix_seed(*seed, "bench.query"), profile);

      LatencyStats st = bench_latency(model, query, enr, *reps);
      char buf[128];
      std::snprintf(buf, sizeof(buf), "median_ms %.4f\np95_ms %.4f\nsamples %lld\n",
                    st.median_ms, st.p95_ms, static_cast<long long>(st.samples));
      std::cout << buf;
      return 0;
    };
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-modal user-defined keyword spotting toolkit"};
  app.require_subcommand(1);

  std::function<int()> run;
  try {
    KvList file_cfg;
    if (argc > 1 && std::string(argv[1]) == "train") {
      const std::string path = preparse_config_path(argc, argv);
      if (!path.empty()) file_cfg = parse_kv_file(path);
    }
    add_synth(app, run);
    add_mine(app, run);
    add_train(app, run, file_cfg);
    add_eval(app, run);
    add_spot(app, run);
    add_export_attn(app, run);
    add_bench(app, run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    check(static_cast<bool>(run), "no command selected");
    return run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
