#include "ctckd/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ctckd/errors.hpp"

namespace ctckd {

namespace {

void check_labels(const PosteriorLattice& lattice,
                  const LabelSequence& labels) {
  for (int token : labels.tokens) {
    if (token < 0 || token >= lattice.vocab_size()) {
      throw InvalidInputError("label token " + std::to_string(token) +
                              " out of range for lattice '" +
                              lattice.utt_id() + "'");
    }
  }
  if (lattice.frames() < min_feasible_frames(labels.tokens)) {
    throw InfeasibleAlignmentError(
        "utterance '" + labels.utt_id + "': " +
        std::to_string(lattice.frames()) + " frames cannot carry " +
        std::to_string(labels.length()) + " labels (need >= " +
        std::to_string(min_feasible_frames(labels.tokens)) + ")");
  }
}

// A state s may be entered from s, s-1, and additionally s-2 when it is a
// token state whose token differs from the one two states back.
bool allows_skip(std::span<const int> extended, int s, int blank) {
  return s >= 2 && extended[s] != blank && extended[s] != extended[s - 2];
}

}  // namespace

int min_feasible_frames(std::span<const int> tokens) {
  int repeats = 0;
  for (size_t i = 1; i < tokens.size(); ++i) {
    if (tokens[i] == tokens[i - 1]) ++repeats;
  }
  return static_cast<int>(tokens.size()) + repeats;
}

TrellisMatrices ctc_trellis(const PosteriorLattice& lattice,
                            const LabelSequence& labels) {
  check_labels(lattice, labels);
  const int blank = lattice.blank_id();
  const auto extended = extend_with_blanks(labels.tokens, blank);
  const int S = static_cast<int>(extended.size());
  const int T = lattice.frames();

  TrellisMatrices trellis;
  trellis.num_states = S;
  trellis.num_frames = T;
  trellis.alpha = Matrix(S, T, kLogZero);
  trellis.beta = Matrix(S, T, kLogZero);
  Matrix& alpha = trellis.alpha;
  Matrix& beta = trellis.beta;

  alpha.at(0, 0) = lattice.log_prob(0, extended[0]);
  if (S > 1) alpha.at(1, 0) = lattice.log_prob(0, extended[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = alpha.at(s, t - 1);
      if (s >= 1) acc = log_add(acc, alpha.at(s - 1, t - 1));
      if (allows_skip(extended, s, blank)) {
        acc = log_add(acc, alpha.at(s - 2, t - 1));
      }
      alpha.at(s, t) =
          saturate_log(acc + lattice.log_prob(t, extended[s]));
    }
  }

  beta.at(S - 1, T - 1) = lattice.log_prob(T - 1, extended[S - 1]);
  if (S > 1) beta.at(S - 2, T - 1) = lattice.log_prob(T - 1, extended[S - 2]);
  for (int t = T - 2; t >= 0; --t) {
    for (int s = S - 1; s >= 0; --s) {
      double acc = beta.at(s, t + 1);
      if (s + 1 < S) acc = log_add(acc, beta.at(s + 1, t + 1));
      if (s + 2 < S && allows_skip(extended, s + 2, blank)) {
        acc = log_add(acc, beta.at(s + 2, t + 1));
      }
      beta.at(s, t) = saturate_log(acc + lattice.log_prob(t, extended[s]));
    }
  }

  double total = alpha.at(S - 1, T - 1);
  if (S > 1) total = log_add(total, alpha.at(S - 2, T - 1));
  trellis.total_log_prob = total;
  return trellis;
}

double ctc_loss(const PosteriorLattice& lattice, const LabelSequence& labels) {
  return -ctc_trellis(lattice, labels).total_log_prob;
}

Matrix ctc_occupancy(const TrellisMatrices& trellis,
                     const PosteriorLattice& lattice,
                     const LabelSequence& labels) {
  const int blank = lattice.blank_id();
  const auto extended = extend_with_blanks(labels.tokens, blank);
  const int T = trellis.num_frames;
  Matrix gamma(T, lattice.num_classes(), 0.0);
  for (int t = 0; t < T; ++t) {
    // log occupancy per class, accumulated over states carrying that class
    std::vector<double> log_occ(lattice.num_classes(), kLogZero);
    for (int s = 0; s < trellis.num_states; ++s) {
      const double joint = trellis.alpha.at(s, t) + trellis.beta.at(s, t) -
                           lattice.log_prob(t, extended[s]);
      log_occ[extended[s]] = log_add(log_occ[extended[s]], joint);
    }
    for (int v = 0; v < lattice.num_classes(); ++v) {
      if (!is_log_zero(log_occ[v])) {
        gamma.at(t, v) = std::exp(log_occ[v] - trellis.total_log_prob);
      }
    }
  }
  return gamma;
}

Matrix ctc_grad(const PosteriorLattice& lattice, const LabelSequence& labels) {
  const TrellisMatrices trellis = ctc_trellis(lattice, labels);
  Matrix grad = ctc_occupancy(trellis, lattice, labels);
  for (int t = 0; t < grad.rows; ++t) {
    for (int v = 0; v < grad.cols; ++v) {
      grad.at(t, v) = std::exp(lattice.log_prob(t, v)) - grad.at(t, v);
    }
  }
  return grad;
}

CtcPath forced_align(const PosteriorLattice& lattice,
                     const LabelSequence& labels) {
  check_labels(lattice, labels);
  const int blank = lattice.blank_id();
  const auto extended = extend_with_blanks(labels.tokens, blank);
  const int S = static_cast<int>(extended.size());
  const int T = lattice.frames();

  Matrix viterbi(S, T, kLogZero);
  // Backpointer: predecessor state, or -1 where structurally unreachable.
  // Reachability is tracked separately from scores so that log-floored
  // emissions cannot mask a valid path.
  std::vector<int> back(static_cast<size_t>(S) * T, -1);
  std::vector<uint8_t> reached(static_cast<size_t>(S) * T, 0);
  const auto idx = [T](int s, int t) {
    return static_cast<size_t>(s) * T + t;
  };

  viterbi.at(0, 0) = lattice.log_prob(0, extended[0]);
  reached[idx(0, 0)] = 1;
  if (S > 1) {
    viterbi.at(1, 0) = lattice.log_prob(0, extended[1]);
    reached[idx(1, 0)] = 1;
  }
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      // Scan predecessors in ascending state order and replace only on a
      // strict improvement: ties keep the lower state, which delays token
      // emission.
      int lo = s;
      if (allows_skip(extended, s, blank)) {
        lo = s - 2;
      } else if (s >= 1) {
        lo = s - 1;
      }
      double best = kLogZero;
      int best_prev = -1;
      for (int p = lo; p <= s; ++p) {
        if (!reached[idx(p, t - 1)]) continue;
        const double candidate = viterbi.at(p, t - 1);
        if (best_prev == -1 || candidate > best) {
          best = candidate;
          best_prev = p;
        }
      }
      if (best_prev == -1) continue;
      viterbi.at(s, t) =
          saturate_log(best + lattice.log_prob(t, extended[s]));
      back[idx(s, t)] = best_prev;
      reached[idx(s, t)] = 1;
    }
  }

  int state = -1;
  if (S > 1 && reached[idx(S - 2, T - 1)]) state = S - 2;
  if (reached[idx(S - 1, T - 1)] &&
      (state == -1 || viterbi.at(S - 1, T - 1) > viterbi.at(state, T - 1))) {
    state = S - 1;
  }
  if (state == -1) {
    throw InfeasibleAlignmentError("utterance '" + labels.utt_id +
                                   "': no reachable path");
  }

  CtcPath path;
  path.frames.assign(T, blank);
  for (int t = T - 1; t >= 0; --t) {
    path.frames[t] = extended[state];
    if (t > 0) state = back[static_cast<size_t>(state) * T + t];
  }
  return path;
}

AlignmentVariant alignment_variant_from_string(const std::string& name) {
  if (name == "all") return AlignmentVariant::kAll;
  if (name == "leftmost") return AlignmentVariant::kLeftmost;
  if (name == "rightmost") return AlignmentVariant::kRightmost;
  throw InvalidInputError("unknown alignment variant '" + name + "'");
}

std::string to_string(AlignmentVariant variant) {
  switch (variant) {
    case AlignmentVariant::kAll:
      return "all";
    case AlignmentVariant::kLeftmost:
      return "leftmost";
    case AlignmentVariant::kRightmost:
      return "rightmost";
  }
  return "all";
}

int AlignmentMap::total_frames() const {
  int total = 0;
  for (const auto& set : frames) total += static_cast<int>(set.size());
  return total;
}

AlignmentMap alignment_map(const CtcPath& path, const LabelSequence& labels,
                           int blank_id, AlignmentVariant variant) {
  // Maximal non-blank runs of the path, in order. Runs map one-to-one onto
  // the collapsed sequence: a blank or a symbol change starts a new run.
  std::vector<std::vector<int>> runs;
  std::vector<int> run_symbols;
  int prev = blank_id;
  for (int t = 0; t < path.length(); ++t) {
    const int symbol = path.frames[t];
    if (symbol != blank_id) {
      if (symbol != prev) {
        runs.emplace_back();
        run_symbols.push_back(symbol);
      }
      runs.back().push_back(t);
    }
    prev = symbol;
  }
  if (run_symbols != labels.tokens) {
    throw PathMismatchError("path collapses to a different sequence than '" +
                            labels.utt_id + "'");
  }
  AlignmentMap map;
  map.frames.reserve(runs.size());
  for (auto& run : runs) {
    switch (variant) {
      case AlignmentVariant::kAll:
        map.frames.push_back(std::move(run));
        break;
      case AlignmentVariant::kLeftmost:
        map.frames.push_back({run.front()});
        break;
      case AlignmentVariant::kRightmost:
        map.frames.push_back({run.back()});
        break;
    }
  }
  return map;
}

std::string format_alignment(const std::string& utt_id,
                             const AlignmentMap& map) {
  std::ostringstream out;
  out << utt_id;
  for (int i = 0; i < map.num_tokens(); ++i) {
    out << ' ' << (i + 1) << ':';
    const auto& set = map.frames[i];
    for (size_t k = 0; k < set.size(); ++k) {
      if (k > 0) out << ',';
      out << (set[k] + 1);
    }
  }
  return out.str();
}

std::pair<std::string, AlignmentMap> parse_alignment(const std::string& line) {
  std::istringstream fields(line);
  std::string utt_id;
  if (!(fields >> utt_id)) {
    throw ParseError("empty alignment line");
  }
  AlignmentMap map;
  std::string group;
  int expected = 1;
  while (fields >> group) {
    const auto colon = group.find(':');
    if (colon == std::string::npos) {
      throw ParseError("alignment group '" + group + "' lacks ':'");
    }
    if (std::stoi(group.substr(0, colon)) != expected) {
      throw ParseError("alignment groups out of order at '" + group + "'");
    }
    ++expected;
    std::vector<int> set;
    std::istringstream frames(group.substr(colon + 1));
    std::string frame;
    while (std::getline(frames, frame, ',')) {
      set.push_back(std::stoi(frame) - 1);
    }
    if (set.empty()) {
      throw ParseError("alignment group '" + group + "' holds no frames");
    }
    map.frames.push_back(std::move(set));
  }
  return {utt_id, map};
}

}  // namespace ctckd
