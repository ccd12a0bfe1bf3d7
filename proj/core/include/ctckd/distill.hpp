#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ctckd/ctc.hpp"
#include "ctckd/lm.hpp"
#include "ctckd/types.hpp"

namespace ctckd {

enum class TeacherKind { kMasked, kCausal, kOneHot };

TeacherKind teacher_kind_from_string(const std::string& name);
std::string to_string(TeacherKind kind);

struct DistillConfig {
  int top_k = 8;
  double temperature = 3.0;
  double alpha = 0.5;  // weight of the KD term in the combined objective
  AlignmentVariant variant = AlignmentVariant::kAll;
  TeacherKind teacher = TeacherKind::kMasked;

  void validate(int vocab_size) const;
};

// Sparse per-position teacher distribution: up to K (token, probability)
// pairs, probabilities summing to 1, token ids unique, blank never present.
struct SoftLabel {
  std::vector<std::pair<int, double>> entries;
};

struct SoftLabelSet {
  std::string utt_id;
  std::vector<SoftLabel> positions;

  int length() const { return static_cast<int>(positions.size()); }
};

// Top-K selection, renormalization, then temperature smoothing
// q_v proportional to p_v^(1/temperature), renormalized again. Ties at the
// K boundary keep the lower token id.
SoftLabelSet make_soft_labels(const MaskedScorer& teacher,
                              const LabelSequence& labels,
                              std::span<const int> pre,
                              std::span<const int> suc,
                              const DistillConfig& cfg);

// Causal-teacher variant: the distribution for position i is
// p(v | pre, y_{<i}).
SoftLabelSet make_soft_labels(const CausalScorer& teacher,
                              const LabelSequence& labels,
                              std::span<const int> pre,
                              const DistillConfig& cfg);

// Degenerate teacher: position i holds exactly {(y_i, 1)}.
SoftLabelSet one_hot_labels(const LabelSequence& labels);

// Alignment-expanded KD loss: mean over aligned frames of the teacher/CTC
// cross-entropy, summing tokens over the sparse support only.
double kd_loss(const PosteriorLattice& lattice, const SoftLabelSet& labels,
               const AlignmentMap& amap);

// Gradient w.r.t. pre-softmax logits. Aligned frames get
// (softmax - teacher) / total_aligned_frames; all other rows are zero.
Matrix kd_grad(const PosteriorLattice& lattice, const SoftLabelSet& labels,
               const AlignmentMap& amap);

struct CombinedResult {
  double loss = 0.0;
  Matrix grad;
};

// (1 - alpha) * ctc + alpha * kd. The most plausible path and its alignment
// map are recomputed from the lattice on the fly unless `fixed_alignment`
// is supplied. The boundaries are exact: alpha == 0 never touches the
// teacher, alpha == 1 never mixes in the CTC term.
CombinedResult combined_loss(const PosteriorLattice& lattice,
                             const LabelSequence& labels,
                             const SoftLabelSet* soft_labels,
                             const DistillConfig& cfg,
                             const AlignmentMap* fixed_alignment = nullptr);

// Soft-label file: JSON lines, one object per utterance:
//   {"utt_id": ..., "positions": [[[tok, p], ...], ...]}
// with probabilities rounded to 12 significant digits.
void write_soft_labels(std::ostream& out, std::span<const SoftLabelSet> sets);
void write_soft_labels(const std::string& path,
                       std::span<const SoftLabelSet> sets);
std::vector<SoftLabelSet> read_soft_labels(std::istream& in, int vocab_size,
                                           const std::string& source_name);
std::vector<SoftLabelSet> read_soft_labels(const std::string& path,
                                           int vocab_size);

std::unordered_map<std::string, SoftLabelSet> index_soft_labels(
    std::vector<SoftLabelSet> sets);

}  // namespace ctckd
