#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctckd/lm.hpp"
#include "ctckd/types.hpp"

namespace ctckd {

struct EditCounts {
  int substitutions = 0;
  int insertions = 0;  // hypothesis tokens with no reference counterpart
  int deletions = 0;   // reference tokens missing from the hypothesis

  int distance() const { return substitutions + insertions + deletions; }
};

// Levenshtein with unit costs. The backtrace is deterministic: on cost ties
// it prefers substitution over insertion over deletion.
EditCounts edit_distance(std::span<const int> hyp, std::span<const int> ref);

// Mean over positions of the negative masked log-probability of the true
// token. The literal value of the pseudo-perplexity formula: an average
// negative log-likelihood in nats, not exponentiated.
double pseudo_ppl(const MaskedScorer& scorer, std::span<const int> tokens);

struct EvalReport {
  int64_t substitutions = 0;
  int64_t insertions = 0;
  int64_t deletions = 0;
  int64_t reference_length = 0;
  int64_t scored_positions = 0;  // hypothesis tokens scored for ppl
  double wer = 0.0;              // (S + I + D) / reference_length
  double ppl = 0.0;              // length-weighted over hypothesis tokens
  bool has_ppl = false;
  int utterance_count = 0;
};

// Corpus-level aggregation. Hypotheses pair with references by utt_id; a
// hypothesis without a reference is an input error. The optional masked
// scorer adds pseudo-perplexity over the hypothesis tokens.
EvalReport evaluate_corpus(std::span<const LabelSequence> hypotheses,
                           std::span<const LabelSequence> references,
                           const MaskedScorer* ppl_scorer = nullptr);

}  // namespace ctckd
