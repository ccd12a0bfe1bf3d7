#include "ctckd/metrics.hpp"

#include <cmath>
#include <unordered_map>

#include "ctckd/errors.hpp"

namespace ctckd {

EditCounts edit_distance(std::span<const int> hyp, std::span<const int> ref) {
  const int n = static_cast<int>(hyp.size());
  const int m = static_cast<int>(ref.size());
  Matrix dp(n + 1, m + 1, 0.0);
  for (int i = 0; i <= n; ++i) dp.at(i, 0) = i;
  for (int j = 0; j <= m; ++j) dp.at(0, j) = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      const double sub = dp.at(i - 1, j - 1) + (hyp[i - 1] != ref[j - 1]);
      const double ins = dp.at(i - 1, j) + 1;
      const double del = dp.at(i, j - 1) + 1;
      dp.at(i, j) = std::min(sub, std::min(ins, del));
    }
  }

  EditCounts counts;
  int i = n, j = m;
  while (i > 0 || j > 0) {
    const double here = dp.at(i, j);
    if (i > 0 && j > 0 &&
        here == dp.at(i - 1, j - 1) + (hyp[i - 1] != ref[j - 1])) {
      if (hyp[i - 1] != ref[j - 1]) ++counts.substitutions;
      --i;
      --j;
    } else if (i > 0 && here == dp.at(i - 1, j) + 1) {
      ++counts.insertions;
      --i;
    } else {
      ++counts.deletions;
      --j;
    }
  }
  return counts;
}

double pseudo_ppl(const MaskedScorer& scorer, std::span<const int> tokens) {
  if (tokens.empty()) {
    throw InvalidInputError("pseudo_ppl needs at least one token");
  }
  double total = 0.0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const auto scores = scorer.score_masked(tokens, static_cast<int>(i), {}, {});
    total -= scores[tokens[i]];
  }
  return total / static_cast<double>(tokens.size());
}

EvalReport evaluate_corpus(std::span<const LabelSequence> hypotheses,
                           std::span<const LabelSequence> references,
                           const MaskedScorer* ppl_scorer) {
  std::unordered_map<std::string, const LabelSequence*> by_id;
  by_id.reserve(references.size());
  for (const auto& ref : references) {
    if (!by_id.emplace(ref.utt_id, &ref).second) {
      throw InvalidInputError("duplicate reference utterance '" + ref.utt_id +
                              "'");
    }
  }

  EvalReport report;
  double nll_sum = 0.0;
  for (const auto& hyp : hypotheses) {
    auto it = by_id.find(hyp.utt_id);
    if (it == by_id.end()) {
      throw InvalidInputError("hypothesis '" + hyp.utt_id +
                              "' has no reference");
    }
    const auto counts = edit_distance(hyp.tokens, it->second->tokens);
    report.substitutions += counts.substitutions;
    report.insertions += counts.insertions;
    report.deletions += counts.deletions;
    report.reference_length += it->second->length();
    ++report.utterance_count;
    if (ppl_scorer != nullptr && !hyp.tokens.empty()) {
      nll_sum += pseudo_ppl(*ppl_scorer, hyp.tokens) * hyp.length();
      report.scored_positions += hyp.length();
    }
  }
  const int64_t errors =
      report.substitutions + report.insertions + report.deletions;
  report.wer = report.reference_length > 0
                   ? static_cast<double>(errors) /
                         static_cast<double>(report.reference_length)
                   : (errors > 0 ? 1.0 : 0.0);
  if (ppl_scorer != nullptr && report.scored_positions > 0) {
    report.has_ppl = true;
    report.ppl = nll_sum / static_cast<double>(report.scored_positions);
  }
  return report;
}

}  // namespace ctckd
