#include "ctckd/lm.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ctckd/errors.hpp"
#include "ctckd/logmath.hpp"

namespace ctckd {

NgramTableLM::NgramTableLM(int vocab_size, double smoothing_k,
                           std::vector<int64_t> unigram_counts,
                           std::map<std::pair<int, int>, int64_t> bigram_counts)
    : vocab_size_(vocab_size),
      smoothing_k_(smoothing_k),
      unigram_counts_(std::move(unigram_counts)),
      context_totals_(vocab_size, 0),
      bigram_counts_(std::move(bigram_counts)) {
  if (vocab_size_ < 1) {
    throw InvalidInputError("ngram table needs vocab_size >= 1");
  }
  if (smoothing_k_ < 0.0) {
    throw InvalidInputError("smoothing k must be non-negative");
  }
  if (static_cast<int>(unigram_counts_.size()) != vocab_size_) {
    throw InvalidInputError("unigram count table has wrong size");
  }
  for (int64_t c : unigram_counts_) total_tokens_ += c;
  for (const auto& [pair, count] : bigram_counts_) {
    const auto [prev, next] = pair;
    if (prev < 0 || prev >= vocab_size_ || next < 0 || next >= vocab_size_) {
      throw InvalidInputError("bigram count references token out of range");
    }
    context_totals_[prev] += count;
  }
}

int64_t NgramTableLM::bigram_count(int prev, int v) const {
  auto it = bigram_counts_.find({prev, v});
  return it == bigram_counts_.end() ? 0 : it->second;
}

double NgramTableLM::unigram_logprob(int v) const {
  const double num = static_cast<double>(unigram_counts_[v]) + smoothing_k_;
  const double den =
      static_cast<double>(total_tokens_) + smoothing_k_ * vocab_size_;
  if (den == 0.0) return -std::log(static_cast<double>(vocab_size_));
  if (num == 0.0) return kLogZero;
  return std::log(num) - std::log(den);
}

double NgramTableLM::conditional_logprob(int v, int prev) const {
  const double den = static_cast<double>(context_totals_[prev]) +
                     smoothing_k_ * vocab_size_;
  if (den == 0.0) return unigram_logprob(v);  // context never observed
  const double num = static_cast<double>(bigram_count(prev, v)) + smoothing_k_;
  if (num == 0.0) return kLogZero;
  return std::log(num) - std::log(den);
}

std::vector<double> NgramTableLM::score_next(
    std::span<const int> context) const {
  std::vector<double> scores(vocab_size_);
  if (context.empty()) {
    for (int v = 0; v < vocab_size_; ++v) scores[v] = unigram_logprob(v);
  } else {
    const int prev = context.back();
    if (prev < 0 || prev >= vocab_size_) {
      throw InvalidInputError("context token out of range");
    }
    for (int v = 0; v < vocab_size_; ++v) {
      scores[v] = conditional_logprob(v, prev);
    }
  }
  return scores;
}

NgramTableLM train_ngram(std::span<const LabelSequence> corpus, int vocab_size,
                         double smoothing_k) {
  std::vector<int64_t> unigrams(vocab_size, 0);
  std::map<std::pair<int, int>, int64_t> bigrams;
  int64_t seen = 0;
  for (const auto& utt : corpus) {
    for (size_t i = 0; i < utt.tokens.size(); ++i) {
      const int token = utt.tokens[i];
      if (token < 0 || token >= vocab_size) {
        throw InvalidInputError("corpus token out of range in '" + utt.utt_id +
                                "'");
      }
      ++unigrams[token];
      ++seen;
      if (i > 0) ++bigrams[{utt.tokens[i - 1], token}];
    }
  }
  if (seen == 0) {
    throw EmptyCorpusError("ngram training corpus holds no tokens");
  }
  return NgramTableLM(vocab_size, smoothing_k, std::move(unigrams),
                      std::move(bigrams));
}

std::vector<double> BigramMaskedLM::score_masked(std::span<const int> sequence,
                                                 int position,
                                                 std::span<const int> pre,
                                                 std::span<const int> suc) const {
  const int length = static_cast<int>(sequence.size());
  if (position < 0 || position >= length) {
    throw InvalidInputError("masked position out of range");
  }
  const int V = tables_.vocab_size();

  bool has_left = false;
  int left = -1;
  if (position > 0) {
    has_left = true;
    left = sequence[position - 1];
  } else if (!pre.empty()) {
    has_left = true;
    left = pre.back();
  }
  bool has_right = false;
  int right = -1;
  if (position + 1 < length) {
    has_right = true;
    right = sequence[position + 1];
  } else if (!suc.empty()) {
    has_right = true;
    right = suc.front();
  }

  std::vector<double> scores(V);
  for (int v = 0; v < V; ++v) {
    double s = has_left ? tables_.conditional_logprob(v, left)
                        : tables_.unigram_logprob(v);
    if (has_right) s += tables_.conditional_logprob(right, v);
    scores[v] = s;
  }
  // Renormalize: the product of the two factors is only proportional to
  // the masked conditional.
  const double lse = log_sum(scores);
  for (double& s : scores) s -= lse;
  return scores;
}

double sequence_logprob(const CausalScorer& lm, std::span<const int> tokens) {
  double total = 0.0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const auto scores = lm.score_next(tokens.subspan(0, i));
    total += scores[tokens[i]];
  }
  return total;
}

double masked_sequence_pll(const MaskedScorer& lm,
                           std::span<const int> tokens) {
  double total = 0.0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const auto scores = lm.score_masked(tokens, static_cast<int>(i), {}, {});
    total += scores[tokens[i]];
  }
  return total;
}

void write_lm(const std::string& path, const NgramTableLM& lm,
              const Vocabulary& vocab) {
  if (vocab.size() != lm.vocab_size()) {
    throw InvalidInputError("LM and vocabulary disagree about V");
  }
  nlohmann::json doc;
  doc["format"] = 1;
  doc["order"] = NgramTableLM::kOrder;
  doc["smoothing_k"] = lm.smoothing_k();
  doc["vocab"] = vocab.tokens();
  std::vector<int64_t> unigrams(lm.vocab_size());
  for (int v = 0; v < lm.vocab_size(); ++v) unigrams[v] = lm.unigram_count(v);
  doc["unigram_counts"] = unigrams;
  auto& bigrams = doc["bigram_counts"] = nlohmann::json::array();
  for (const auto& [pair, count] : lm.bigram_counts()) {
    bigrams.push_back({pair.first, pair.second, count});
  }
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
  out << doc.dump() << '\n';
}

LmFile read_lm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open '" + path + "' for reading");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("format", 0) != 1) {
    throw ParseError(path + ": not a format-1 LM table file");
  }
  if (doc.value("order", 0) != NgramTableLM::kOrder) {
    throw ParseError(path + ": unsupported ngram order");
  }
  Vocabulary vocab(doc.at("vocab").get<std::vector<std::string>>());
  auto unigrams = doc.at("unigram_counts").get<std::vector<int64_t>>();
  std::map<std::pair<int, int>, int64_t> bigrams;
  for (const auto& entry : doc.at("bigram_counts")) {
    if (!entry.is_array() || entry.size() != 3) {
      throw ParseError(path + ": malformed bigram count entry");
    }
    bigrams[{entry[0].get<int>(), entry[1].get<int>()}] =
        entry[2].get<int64_t>();
  }
  return LmFile{NgramTableLM(vocab.size(), doc.at("smoothing_k").get<double>(),
                             std::move(unigrams), std::move(bigrams)),
                std::move(vocab)};
}

}  // namespace ctckd
