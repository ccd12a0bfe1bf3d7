#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctckd/types.hpp"

namespace ctckd {

// Recipe for a synthetic speech-like corpus: transcripts follow a bigram
// chain over V tokens; each token emits 1..max_frames_per_token feature
// frames drawn around its mean vector, with optional silence (zero-mean)
// frames between tokens. Tokens listed in confusable_pairs share the mean
// of the pair's first member, so only context can tell them apart.
struct SyntheticCorpusSpec {
  int vocab_size = 0;
  int feature_dim = 0;
  std::vector<double> initial;              // V, need not be normalized
  Matrix transitions;                       // V x V, rows stochastic
  std::vector<std::vector<double>> token_means;  // V x feature_dim
  std::vector<std::pair<int, int>> confusable_pairs;
  double noise_sigma = 0.1;
  int min_frames_per_token = 1;
  int max_frames_per_token = 3;
  int min_silence_frames = 0;
  int max_silence_frames = 2;
  int min_tokens = 2;
  int max_tokens = 8;
  uint64_t seed = 1;

  void validate() const;
};

struct Utterance {
  std::string utt_id;
  Matrix features;             // T x feature_dim
  std::vector<int> transcript;
};

struct Corpus {
  std::vector<Utterance> utterances;

  std::vector<LabelSequence> transcripts() const;
};

// Deterministic given spec.seed: two calls with equal arguments produce
// byte-identical corpora.
Corpus generate_corpus(const SyntheticCorpusSpec& spec, int n_utts,
                       const std::string& utt_prefix = "synth");

// The stock desk-scale recipe: V tokens with one acoustically identical
// pair whose identity is decidable only from neighbouring tokens. Cue
// tokens 0 and 1 select which member of the pair follows; the pair members
// in turn prefer disjoint successor sets.
SyntheticCorpusSpec standard_corpus_spec(uint64_t seed);

// Vocabulary matching a spec: tokens "w00", "w01", ...
Vocabulary spec_vocabulary(const SyntheticCorpusSpec& spec);

// Feature file, same shape as the lattice format:
//   line 1:      utt_id T D
//   lines 2..T+1: D floats (17 significant digits).
void write_features(const std::string& path, const Corpus& corpus);
std::vector<std::pair<std::string, Matrix>> read_features(
    const std::string& path);

}  // namespace ctckd
