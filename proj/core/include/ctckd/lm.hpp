#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctckd/types.hpp"

namespace ctckd {

// Left-to-right scorer: a normalized log-probability vector over the V real
// tokens given the tokens to the left.
class CausalScorer {
 public:
  virtual ~CausalScorer() = default;
  virtual std::vector<double> score_next(std::span<const int> context) const = 0;
};

// Bidirectional scorer: a normalized log-probability vector over V for the
// masked position. The token currently at `position` is ignored; `pre` and
// `suc` extend the context beyond the utterance boundaries.
class MaskedScorer {
 public:
  virtual ~MaskedScorer() = default;
  virtual std::vector<double> score_masked(std::span<const int> sequence,
                                           int position,
                                           std::span<const int> pre,
                                           std::span<const int> suc) const = 0;
};

// Bigram table LM with add-k smoothing. Probabilities are exact closed
// forms of the counts:
//   p(v | u) = (count(u, v) + k) / (count(u) + k V)
//   p(v)     = (count(v) + k) / (total + k V)
// An empty or unseen context falls back to the unigram distribution.
class NgramTableLM final : public CausalScorer {
 public:
  NgramTableLM(int vocab_size, double smoothing_k,
               std::vector<int64_t> unigram_counts,
               std::map<std::pair<int, int>, int64_t> bigram_counts);

  static constexpr int kOrder = 2;

  int vocab_size() const { return vocab_size_; }
  double smoothing_k() const { return smoothing_k_; }
  int64_t total_tokens() const { return total_tokens_; }
  int64_t unigram_count(int v) const { return unigram_counts_[v]; }
  int64_t bigram_count(int prev, int v) const;
  const std::map<std::pair<int, int>, int64_t>& bigram_counts() const {
    return bigram_counts_;
  }

  double unigram_logprob(int v) const;
  double conditional_logprob(int v, int prev) const;  // log p(v | prev)

  std::vector<double> score_next(std::span<const int> context) const override;

 private:
  int vocab_size_;
  double smoothing_k_;
  std::vector<int64_t> unigram_counts_;
  std::vector<int64_t> context_totals_;
  std::map<std::pair<int, int>, int64_t> bigram_counts_;
  int64_t total_tokens_ = 0;
};

// Throws EmptyCorpusError when the corpus holds no tokens.
NgramTableLM train_ngram(std::span<const LabelSequence> corpus, int vocab_size,
                         double smoothing_k);

// Masked predictor assembled from the same bigram tables:
//   p(v | left, right)  proportional to  p(v | left) * p(right | v)
// with the unigram replacing a factor whose side has no context.
class BigramMaskedLM final : public MaskedScorer {
 public:
  explicit BigramMaskedLM(NgramTableLM tables) : tables_(std::move(tables)) {}

  const NgramTableLM& tables() const { return tables_; }

  std::vector<double> score_masked(std::span<const int> sequence, int position,
                                   std::span<const int> pre,
                                   std::span<const int> suc) const override;

 private:
  NgramTableLM tables_;
};

// Sum over i of log p(y_i | y_{<i}); the first token is scored by the
// unigram. Empty sequences score 0.
double sequence_logprob(const CausalScorer& lm, std::span<const int> tokens);

// Pseudo-log-likelihood: sum over positions of the masked log-probability of
// the true token. Unnormalized by length; the rescoring score for masked
// scorers. Empty sequences score 0.
double masked_sequence_pll(const MaskedScorer& lm, std::span<const int> tokens);

// LM table file: versioned JSON carrying the vocabulary, order, smoothing k
// and count tables.
struct LmFile {
  NgramTableLM lm;
  Vocabulary vocab;
};
void write_lm(const std::string& path, const NgramTableLM& lm,
              const Vocabulary& vocab);
LmFile read_lm(const std::string& path);

}  // namespace ctckd
