#include "ctckd/types.hpp"

#include <cmath>
#include <utility>

#include "ctckd/errors.hpp"

namespace ctckd {

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty()) {
    throw InvalidInputError("vocabulary must hold at least one token");
  }
  index_.reserve(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw InvalidInputError("vocabulary token " + std::to_string(i) +
                              " is empty");
    }
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<int>(i));
    if (!inserted) {
      throw InvalidInputError("duplicate vocabulary token '" + tokens_[i] +
                              "'");
    }
  }
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

void validate_lattice(const std::string& utt_id, const Matrix& log_probs) {
  if (log_probs.rows < 1) {
    throw InvalidInputError("lattice '" + utt_id +
                            "' must have at least one frame");
  }
  if (log_probs.cols < 2) {
    throw InvalidInputError("lattice '" + utt_id +
                            "' must have at least one token column plus blank");
  }
  for (int t = 0; t < log_probs.rows; ++t) {
    double sum = 0.0;
    for (double x : log_probs.row(t)) {
      if (std::isnan(x) || x > 1e-9) {
        throw InvalidInputError("lattice '" + utt_id + "' frame " +
                                std::to_string(t) +
                                " holds a non-log-probability entry");
      }
      sum += std::exp(x);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw InvalidInputError("lattice '" + utt_id + "' frame " +
                              std::to_string(t) +
                              " is not row-stochastic (sum " +
                              std::to_string(sum) + ")");
    }
  }
}

}  // namespace

PosteriorLattice::PosteriorLattice(std::string utt_id, Matrix log_probs)
    : utt_id_(std::move(utt_id)), log_probs_(std::move(log_probs)) {
  validate_lattice(utt_id_, log_probs_);
}

PosteriorLattice PosteriorLattice::from_logits(std::string utt_id,
                                               Matrix logits) {
  for (int t = 0; t < logits.rows; ++t) {
    log_softmax_inplace(logits.row(t));
  }
  return PosteriorLattice(std::move(utt_id), std::move(logits));
}

std::vector<int> collapse(std::span<const int> path, int blank_id) {
  std::vector<int> out;
  int prev = blank_id;
  for (int symbol : path) {
    if (symbol != prev && symbol != blank_id) {
      out.push_back(symbol);
    }
    prev = symbol;
  }
  return out;
}

std::vector<int> extend_with_blanks(std::span<const int> tokens,
                                    int blank_id) {
  std::vector<int> out;
  out.reserve(2 * tokens.size() + 1);
  out.push_back(blank_id);
  for (int token : tokens) {
    out.push_back(token);
    out.push_back(blank_id);
  }
  return out;
}

}  // namespace ctckd
