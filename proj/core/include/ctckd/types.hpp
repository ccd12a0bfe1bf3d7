#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctckd/logmath.hpp"

namespace ctckd {

// Dense row-major matrix of doubles. Used for lattices, gradients and
// feature blocks; deliberately minimal.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }
  std::span<double> row(int r) {
    return {data.data() + static_cast<size_t>(r) * cols,
            static_cast<size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<size_t>(r) * cols,
            static_cast<size_t>(cols)};
  }
};

// Token inventory. The blank symbol is not a member: it always occupies the
// extra last column, index size(), of every lattice built against this
// vocabulary. Token strings are unique and non-empty.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }  // V
  int blank_id() const { return size(); }
  int num_classes() const { return size() + 1; }  // V + 1 lattice columns

  const std::string& token(int id) const { return tokens_.at(id); }
  std::optional<int> find(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Token-level target sequence y = (y_1, ..., y_L). Blank never appears.
struct LabelSequence {
  std::string utt_id;
  std::vector<int> tokens;

  int length() const { return static_cast<int>(tokens.size()); }
};

// Frame-level labelling pi = (pi_1, ..., pi_T) over tokens plus blank.
struct CtcPath {
  std::vector<int> frames;

  int length() const { return static_cast<int>(frames.size()); }
};

// Per-frame log-probabilities over the vocabulary plus blank (last column).
// Rows are validated eagerly: every entry <= 0 and each row exponentiates
// and sums to 1 within 1e-6. Downstream code assumes both.
class PosteriorLattice {
 public:
  PosteriorLattice(std::string utt_id, Matrix log_probs);

  // Applies log-softmax per row, then validates.
  static PosteriorLattice from_logits(std::string utt_id, Matrix logits);

  const std::string& utt_id() const { return utt_id_; }
  int frames() const { return log_probs_.rows; }           // T
  int num_classes() const { return log_probs_.cols; }      // V + 1
  int vocab_size() const { return log_probs_.cols - 1; }   // V
  int blank_id() const { return log_probs_.cols - 1; }

  double log_prob(int t, int v) const { return log_probs_.at(t, v); }
  std::span<const double> row(int t) const { return log_probs_.row(t); }
  const Matrix& log_probs() const { return log_probs_; }

 private:
  std::string utt_id_;
  Matrix log_probs_;
};

// The collapse mapping: merge consecutive duplicates, then drop blanks.
// An all-blank path collapses to the empty sequence.
std::vector<int> collapse(std::span<const int> path, int blank_id);

// Blank-interleaved label sequence (phi, y_1, phi, ..., y_L, phi) of length
// 2L + 1, the state axis of the forward-backward trellis.
std::vector<int> extend_with_blanks(std::span<const int> tokens, int blank_id);

}  // namespace ctckd
