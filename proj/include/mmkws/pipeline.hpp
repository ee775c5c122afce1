#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mmkws/corpus.hpp"
#include "mmkws/evaluation.hpp"
#include "mmkws/model.hpp"
#include "mmkws/training.hpp"

namespace mmkws {

// Artifact plumbing shared by the command-line tool and the test suite, so
// scripted runs and in-process runs produce identical files.

// Builds the dataset and copies the lexicon, vocabulary, and (optional)
// semantic table into out_dir, making the directory self-contained.
CorpusManifest synth_corpus(const CorpusSpec& spec, const std::string& lexicon_path,
                            const std::string& vocab_path, const std::string& semantics_path,
                            const std::string& out_dir);

// A corpus directory opened together with its bundled resources.
struct CorpusBundle {
  CorpusManifest manifest;
  Lexicon lexicon;
  Vocab vocab;
  std::string dir;
};
CorpusBundle open_corpus(const std::string& dir);

// Checkpoint contents: {"model": ..., "train": ..., "config_hash": hash of
// the model section}.
void save_model(const std::string& path, const Model& model, const nlohmann::json& train_info);
Model load_model(const std::string& path);

// Human-readable mismatches between a checkpoint's architecture and what the
// corpus bundle implies; empty when compatible.
std::vector<std::string> config_conflicts(const ModelConfig& cfg, const CorpusBundle& bundle);

// Trains a fresh model over the bundle and writes checkpoint.mmkw, loss.csv,
// and train_config.json under out_dir. steps = 0 saves the initialization.
TrainResult run_training(const CorpusBundle& bundle, const ModelConfig& mc, const TrainConfig& tc,
                         const std::string& out_dir);

// Evaluates and, when report_path is non-empty, writes the JSON report.
EvalReport run_evaluation(const Model& model, const CorpusBundle& bundle, const EvalOptions& opts,
                          const std::string& report_path);

}  // namespace mmkws
