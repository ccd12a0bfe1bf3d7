#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctckd/lm.hpp"
#include "ctckd/types.hpp"

namespace ctckd {

struct DecodeConfig {
  int beam_width = 8;
  double fusion_weight = 0.0;  // lambda; 0 disables the LM entirely
  int nbest = 1;
  double length_bonus = 0.0;

  void validate() const;
};

struct Hypothesis {
  LabelSequence tokens;
  double asr_logprob = 0.0;
  std::optional<double> lm_logprob;
  double fused_score = 0.0;
  // Diagnostic split of asr_logprob by whether the surviving paths end in
  // blank; asr_logprob == log_add of the two.
  double blank_logprob = kLogZero;
  double nonblank_logprob = kLogZero;
};

// Operation counters for the greedy decoder. The count is a pure function
// of the lattice shape, which is what makes the zero-inference-overhead
// check assertable.
struct DecodeStats {
  uint64_t rows_scanned = 0;
  uint64_t comparisons = 0;
  uint64_t collapse_steps = 0;

  uint64_t total() const { return rows_scanned + comparisons + collapse_steps; }
};

// collapse(per-frame argmax). Ties inside a row keep the lowest class index.
LabelSequence greedy_decode(const PosteriorLattice& lattice,
                            DecodeStats* stats = nullptr);

// CTC prefix beam search. Prefixes merge by collapsed label sequence and
// carry separate blank/non-blank path masses; when an LM is attached with
// fusion_weight > 0, each newly emitted token adds
// fusion_weight * log p_LM(v | prefix) to the pruning score. Returns up to
// `nbest` distinct sequences ranked by fused score.
std::vector<Hypothesis> beam_search(const PosteriorLattice& lattice,
                                    const DecodeConfig& cfg,
                                    const CausalScorer* lm = nullptr);

// Re-rank with new score = asr_logprob + weight * sequence score. The
// masked variant scores with the pseudo-log-likelihood sum. weight == 0
// leaves the order untouched.
std::vector<Hypothesis> rescore(std::vector<Hypothesis> nbest,
                                const CausalScorer& scorer, double weight);
std::vector<Hypothesis> rescore(std::vector<Hypothesis> nbest,
                                const MaskedScorer& scorer, double weight);

// Hypothesis with minimum edit distance to the reference; ties go to the
// higher asr_logprob, then to the earlier rank.
const Hypothesis& oracle_select(std::span<const Hypothesis> nbest,
                                const LabelSequence& reference);

// N-best output: JSON lines
// {"utt_id", "rank", "tokens", "asr_logprob", "lm_logprob", "fused_score"}.
void write_nbest(std::ostream& out, std::span<const Hypothesis> nbest,
                 const Vocabulary& vocab);

}  // namespace ctckd
