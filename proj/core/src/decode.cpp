#include "ctckd/decode.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "ctckd/errors.hpp"
#include "ctckd/logmath.hpp"
#include "ctckd/metrics.hpp"

namespace ctckd {

void DecodeConfig::validate() const {
  if (beam_width < 1) throw InvalidInputError("beam width must be >= 1");
  if (nbest < 1) throw InvalidInputError("nbest must be >= 1");
  if (fusion_weight < 0.0) {
    throw InvalidInputError("fusion weight must be >= 0");
  }
}

LabelSequence greedy_decode(const PosteriorLattice& lattice,
                            DecodeStats* stats) {
  DecodeStats local;
  std::vector<int> argmax(lattice.frames());
  for (int t = 0; t < lattice.frames(); ++t) {
    ++local.rows_scanned;
    const auto row = lattice.row(t);
    int best = 0;
    for (int v = 1; v < lattice.num_classes(); ++v) {
      ++local.comparisons;
      if (row[v] > row[best]) best = v;
    }
    argmax[t] = best;
  }
  local.collapse_steps = static_cast<uint64_t>(lattice.frames());
  LabelSequence out;
  out.utt_id = lattice.utt_id();
  out.tokens = collapse(argmax, lattice.blank_id());
  if (stats != nullptr) *stats = local;
  return out;
}

namespace {

// Per-prefix search state. asr mass is split by whether the last frame was
// blank; lm_score is the sum of log p_LM over the emitted tokens, which is a
// function of the prefix alone.
struct PrefixMass {
  double blank = kLogZero;      // paths ending in blank
  double non_blank = kLogZero;  // paths ending in the prefix's last token
  double lm_score = 0.0;

  double total() const { return log_add(blank, non_blank); }
};

using Beam = std::map<std::vector<int>, PrefixMass>;

double fused(const std::vector<int>& prefix, const PrefixMass& mass,
             const DecodeConfig& cfg, bool use_lm) {
  double score = mass.total() + cfg.length_bonus * prefix.size();
  if (use_lm) score += cfg.fusion_weight * mass.lm_score;
  return score;
}

}  // namespace

std::vector<Hypothesis> beam_search(const PosteriorLattice& lattice,
                                    const DecodeConfig& cfg,
                                    const CausalScorer* lm) {
  cfg.validate();
  const bool use_lm = lm != nullptr && cfg.fusion_weight > 0.0;
  const int blank = lattice.blank_id();
  const int V = lattice.vocab_size();

  Beam beam;
  beam[{}] = PrefixMass{0.0, kLogZero, 0.0};

  for (int t = 0; t < lattice.frames(); ++t) {
    const auto row = lattice.row(t);
    Beam next;
    for (const auto& [prefix, mass] : beam) {
      // LM scores for one-token extensions of this prefix, fetched once.
      std::vector<double> lm_row;
      if (use_lm) lm_row = lm->score_next(prefix);

      // Blank keeps the prefix.
      PrefixMass& same = next[prefix];
      same.lm_score = mass.lm_score;
      same.blank = log_add(same.blank, mass.total() + row[blank]);

      for (int v = 0; v < V; ++v) {
        const double emit = row[v];
        if (!prefix.empty() && v == prefix.back()) {
          // Repeated symbol merges into the same prefix...
          same.non_blank = log_add(same.non_blank, mass.non_blank + emit);
          // ...while a blank-separated repeat emits a new token.
          std::vector<int> extended = prefix;
          extended.push_back(v);
          PrefixMass& ext = next[extended];
          ext.lm_score = mass.lm_score + (use_lm ? lm_row[v] : 0.0);
          ext.non_blank = log_add(ext.non_blank, mass.blank + emit);
        } else {
          std::vector<int> extended = prefix;
          extended.push_back(v);
          PrefixMass& ext = next[extended];
          ext.lm_score = mass.lm_score + (use_lm ? lm_row[v] : 0.0);
          ext.non_blank = log_add(ext.non_blank, mass.total() + emit);
        }
      }
    }

    // Prune to the beam width by fused score; ties prefer the
    // lexicographically smaller prefix, which std::map order provides.
    if (static_cast<int>(next.size()) > cfg.beam_width) {
      std::vector<std::pair<double, const std::vector<int>*>> ranked;
      ranked.reserve(next.size());
      for (const auto& [prefix, mass] : next) {
        ranked.emplace_back(fused(prefix, mass, cfg, use_lm), &prefix);
      }
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) {
                         return a.first > b.first;
                       });
      Beam pruned;
      for (int i = 0; i < cfg.beam_width; ++i) {
        pruned.emplace(*ranked[i].second, next.at(*ranked[i].second));
      }
      next = std::move(pruned);
    }
    beam = std::move(next);
  }

  std::vector<std::pair<double, const std::vector<int>*>> ranked;
  ranked.reserve(beam.size());
  for (const auto& [prefix, mass] : beam) {
    ranked.emplace_back(fused(prefix, mass, cfg, use_lm), &prefix);
  }
  std::stable_sort(
      ranked.begin(), ranked.end(),
      [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<Hypothesis> out;
  const int count = std::min<int>(cfg.nbest, static_cast<int>(ranked.size()));
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const auto& prefix = *ranked[i].second;
    const auto& mass = beam.at(prefix);
    Hypothesis hyp;
    hyp.tokens.utt_id = lattice.utt_id();
    hyp.tokens.tokens = prefix;
    hyp.asr_logprob = mass.total();
    hyp.blank_logprob = mass.blank;
    hyp.nonblank_logprob = mass.non_blank;
    if (use_lm) hyp.lm_logprob = mass.lm_score;
    hyp.fused_score = ranked[i].first;
    out.push_back(std::move(hyp));
  }
  return out;
}

namespace {

std::vector<Hypothesis> rescore_with(
    std::vector<Hypothesis> nbest, double weight,
    const std::function<double(std::span<const int>)>& sequence_score) {
  for (auto& hyp : nbest) {
    const double lm = sequence_score(hyp.tokens.tokens);
    hyp.lm_logprob = lm;
    hyp.fused_score = hyp.asr_logprob + weight * lm;
  }
  if (weight == 0.0) return nbest;  // order untouched by contract
  std::stable_sort(nbest.begin(), nbest.end(),
                   [](const Hypothesis& a, const Hypothesis& b) {
                     return a.fused_score > b.fused_score;
                   });
  return nbest;
}

}  // namespace

std::vector<Hypothesis> rescore(std::vector<Hypothesis> nbest,
                                const CausalScorer& scorer, double weight) {
  return rescore_with(std::move(nbest), weight,
                      [&scorer](std::span<const int> tokens) {
                        return sequence_logprob(scorer, tokens);
                      });
}

std::vector<Hypothesis> rescore(std::vector<Hypothesis> nbest,
                                const MaskedScorer& scorer, double weight) {
  return rescore_with(std::move(nbest), weight,
                      [&scorer](std::span<const int> tokens) {
                        return masked_sequence_pll(scorer, tokens);
                      });
}

const Hypothesis& oracle_select(std::span<const Hypothesis> nbest,
                                const LabelSequence& reference) {
  if (nbest.empty()) {
    throw InvalidInputError("oracle_select needs a non-empty n-best list");
  }
  size_t best = 0;
  int best_distance =
      edit_distance(nbest[0].tokens.tokens, reference.tokens).distance();
  for (size_t i = 1; i < nbest.size(); ++i) {
    const int distance =
        edit_distance(nbest[i].tokens.tokens, reference.tokens).distance();
    if (distance < best_distance ||
        (distance == best_distance &&
         nbest[i].asr_logprob > nbest[best].asr_logprob)) {
      best = i;
      best_distance = distance;
    }
  }
  return nbest[best];
}

void write_nbest(std::ostream& out, std::span<const Hypothesis> nbest,
                 const Vocabulary& vocab) {
  int rank = 0;
  for (const auto& hyp : nbest) {
    nlohmann::json doc;
    doc["utt_id"] = hyp.tokens.utt_id;
    doc["rank"] = rank++;
    std::vector<std::string> tokens;
    tokens.reserve(hyp.tokens.tokens.size());
    for (int token : hyp.tokens.tokens) tokens.push_back(vocab.token(token));
    doc["tokens"] = std::move(tokens);
    doc["asr_logprob"] = hyp.asr_logprob;
    if (hyp.lm_logprob) {
      doc["lm_logprob"] = *hyp.lm_logprob;
    } else {
      doc["lm_logprob"] = nullptr;
    }
    doc["fused_score"] = hyp.fused_score;
    out << doc.dump() << '\n';
  }
}

}  // namespace ctckd
