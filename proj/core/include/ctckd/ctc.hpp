#pragma once

#include <string>
#include <vector>

#include "ctckd/types.hpp"

namespace ctckd {

// Forward and backward variables over the blank-extended label sequence.
// Both alpha[s][t] and beta[s][t] include the emission at frame t, so for
// every t:  logsum_s(alpha[s][t] + beta[s][t] - emit[t][label(s)]) equals
// total_log_prob.
struct TrellisMatrices {
  int num_states = 0;  // 2L + 1
  int num_frames = 0;  // T
  Matrix alpha;        // num_states x num_frames, log domain
  Matrix beta;
  double total_log_prob = kLogZero;  // log p(y | X)
};

// L plus the number of adjacent equal label pairs; the shortest path that
// collapses to `tokens` has this many frames.
int min_feasible_frames(std::span<const int> tokens);

// Throws InfeasibleAlignmentError when frames < min_feasible_frames.
TrellisMatrices ctc_trellis(const PosteriorLattice& lattice,
                            const LabelSequence& labels);

// Negative log-likelihood -log p(y | X) in nats, summed over all paths that
// collapse to the labels.
double ctc_loss(const PosteriorLattice& lattice, const LabelSequence& labels);

// Posterior symbol occupancy gamma[t][v]; every row sums to 1.
Matrix ctc_occupancy(const TrellisMatrices& trellis,
                     const PosteriorLattice& lattice,
                     const LabelSequence& labels);

// Gradient of ctc_loss w.r.t. pre-softmax logits: softmax[t][v] - gamma[t][v].
Matrix ctc_grad(const PosteriorLattice& lattice, const LabelSequence& labels);

// Most plausible path: argmax over paths collapsing to the labels, computed
// as max-product Viterbi over the same blank-extended trellis as the loss.
// Score ties prefer lower extended-state indices (token emission as late as
// possible); equivalently, the chosen path minimizes the state sequence read
// backwards (s_T, s_{T-1}, ..., s_1) lexicographically among the argmax set.
CtcPath forced_align(const PosteriorLattice& lattice,
                     const LabelSequence& labels);

enum class AlignmentVariant { kAll, kLeftmost, kRightmost };

AlignmentVariant alignment_variant_from_string(const std::string& name);
std::string to_string(AlignmentVariant variant);

// One-to-many mapping from token index i to the frames of the path that
// carry that token. Frames are 0-based internally; the dump format below is
// 1-based. Blank frames appear in no entry; entries are sorted, disjoint and
// strictly increasing across tokens.
struct AlignmentMap {
  std::vector<std::vector<int>> frames;  // frames[i] for token i

  int num_tokens() const { return static_cast<int>(frames.size()); }
  int total_frames() const;
};

// Throws PathMismatchError when collapse(path) differs from the labels.
AlignmentMap alignment_map(const CtcPath& path, const LabelSequence& labels,
                           int blank_id, AlignmentVariant variant);

// Dump format, one line per utterance: `utt_id 1:1 2:4,5 3:7` with 1-based
// token and frame indices.
std::string format_alignment(const std::string& utt_id,
                             const AlignmentMap& map);
std::pair<std::string, AlignmentMap> parse_alignment(const std::string& line);

}  // namespace ctckd
