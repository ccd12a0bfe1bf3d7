#include "ctckd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctckd/errors.hpp"
#include "ctckd/lattice_io.hpp"
#include "ctckd/logmath.hpp"

namespace ctckd {

TeacherKind teacher_kind_from_string(const std::string& name) {
  if (name == "masked") return TeacherKind::kMasked;
  if (name == "causal") return TeacherKind::kCausal;
  if (name == "onehot") return TeacherKind::kOneHot;
  throw InvalidInputError("unknown teacher kind '" + name + "'");
}

std::string to_string(TeacherKind kind) {
  switch (kind) {
    case TeacherKind::kMasked:
      return "masked";
    case TeacherKind::kCausal:
      return "causal";
    case TeacherKind::kOneHot:
      return "onehot";
  }
  return "masked";
}

void DistillConfig::validate(int vocab_size) const {
  if (top_k < 1 || top_k > vocab_size) {
    throw InvalidInputError("top_k must lie in [1, V]");
  }
  if (temperature <= 0.0) {
    throw InvalidInputError("temperature must be positive");
  }
  if (alpha < 0.0 || alpha > 1.0) {
    throw InvalidInputError("alpha must lie in [0, 1]");
  }
}

namespace {

// Shared tail of both teacher variants: keep the K most probable tokens,
// renormalize, smooth with q ∝ p^(1/temperature), renormalize again.
SoftLabel sparsify(std::span<const double> log_probs, int top_k,
                   double temperature) {
  std::vector<int> order(log_probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (log_probs[a] != log_probs[b]) return log_probs[a] > log_probs[b];
    return a < b;
  });
  const int kept = std::min<int>(top_k, static_cast<int>(order.size()));

  std::vector<double> selected(kept);
  for (int i = 0; i < kept; ++i) selected[i] = log_probs[order[i]];
  double lse = log_sum(selected);
  for (double& s : selected) s = (s - lse) / temperature;
  lse = log_sum(selected);

  SoftLabel label;
  label.entries.reserve(kept);
  for (int i = 0; i < kept; ++i) {
    label.entries.emplace_back(order[i], std::exp(selected[i] - lse));
  }
  // Entries are kept in ascending token order so that sparse accumulation
  // visits terms exactly like a dense loop over the vocabulary.
  std::sort(label.entries.begin(), label.entries.end());
  return label;
}

}  // namespace

SoftLabelSet make_soft_labels(const MaskedScorer& teacher,
                              const LabelSequence& labels,
                              std::span<const int> pre,
                              std::span<const int> suc,
                              const DistillConfig& cfg) {
  SoftLabelSet set;
  set.utt_id = labels.utt_id;
  set.positions.reserve(labels.tokens.size());
  for (int i = 0; i < labels.length(); ++i) {
    const auto scores = teacher.score_masked(labels.tokens, i, pre, suc);
    set.positions.push_back(sparsify(scores, cfg.top_k, cfg.temperature));
  }
  return set;
}

SoftLabelSet make_soft_labels(const CausalScorer& teacher,
                              const LabelSequence& labels,
                              std::span<const int> pre,
                              const DistillConfig& cfg) {
  std::vector<int> context(pre.begin(), pre.end());
  SoftLabelSet set;
  set.utt_id = labels.utt_id;
  set.positions.reserve(labels.tokens.size());
  for (int i = 0; i < labels.length(); ++i) {
    const auto scores = teacher.score_next(context);
    set.positions.push_back(sparsify(scores, cfg.top_k, cfg.temperature));
    context.push_back(labels.tokens[i]);
  }
  return set;
}

SoftLabelSet one_hot_labels(const LabelSequence& labels) {
  SoftLabelSet set;
  set.utt_id = labels.utt_id;
  set.positions.reserve(labels.tokens.size());
  for (int token : labels.tokens) {
    set.positions.push_back(SoftLabel{{{token, 1.0}}});
  }
  return set;
}

namespace {

void check_shapes(const PosteriorLattice& lattice, const SoftLabelSet& labels,
                  const AlignmentMap& amap) {
  if (labels.length() != amap.num_tokens()) {
    throw IndexMismatchError(
        "soft labels cover " + std::to_string(labels.length()) +
        " positions but the alignment map has " +
        std::to_string(amap.num_tokens()));
  }
  for (const auto& set : amap.frames) {
    for (int t : set) {
      if (t < 0 || t >= lattice.frames()) {
        throw IndexMismatchError("alignment frame " + std::to_string(t) +
                                 " outside lattice '" + lattice.utt_id() +
                                 "'");
      }
    }
  }
}

}  // namespace

double kd_loss(const PosteriorLattice& lattice, const SoftLabelSet& labels,
               const AlignmentMap& amap) {
  check_shapes(lattice, labels, amap);
  const int total = amap.total_frames();
  if (total == 0) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < amap.num_tokens(); ++i) {
    for (int t : amap.frames[i]) {
      for (const auto& [token, prob] : labels.positions[i].entries) {
        acc += prob * lattice.log_prob(t, token);
      }
    }
  }
  return -acc / total;
}

Matrix kd_grad(const PosteriorLattice& lattice, const SoftLabelSet& labels,
               const AlignmentMap& amap) {
  check_shapes(lattice, labels, amap);
  Matrix grad(lattice.frames(), lattice.num_classes(), 0.0);
  const int total = amap.total_frames();
  if (total == 0) return grad;
  const double scale = 1.0 / total;
  for (int i = 0; i < amap.num_tokens(); ++i) {
    for (int t : amap.frames[i]) {
      auto row = grad.row(t);
      const auto lat_row = lattice.row(t);
      for (int v = 0; v < lattice.num_classes(); ++v) {
        row[v] = std::exp(lat_row[v]) * scale;
      }
      for (const auto& [token, prob] : labels.positions[i].entries) {
        row[token] -= prob * scale;
      }
    }
  }
  return grad;
}

CombinedResult combined_loss(const PosteriorLattice& lattice,
                             const LabelSequence& labels,
                             const SoftLabelSet* soft_labels,
                             const DistillConfig& cfg,
                             const AlignmentMap* fixed_alignment) {
  cfg.validate(lattice.vocab_size());
  CombinedResult result;
  if (cfg.alpha == 0.0) {
    result.loss = ctc_loss(lattice, labels);
    result.grad = ctc_grad(lattice, labels);
    return result;
  }
  if (soft_labels == nullptr) {
    throw InvalidInputError("combined_loss with alpha > 0 needs soft labels");
  }
  AlignmentMap recomputed;
  const AlignmentMap* amap = fixed_alignment;
  if (amap == nullptr) {
    const CtcPath path = forced_align(lattice, labels);
    recomputed =
        alignment_map(path, labels, lattice.blank_id(), cfg.variant);
    amap = &recomputed;
  }
  if (cfg.alpha == 1.0) {
    result.loss = kd_loss(lattice, *soft_labels, *amap);
    result.grad = kd_grad(lattice, *soft_labels, *amap);
    return result;
  }
  const double ctc_part = ctc_loss(lattice, labels);
  const double kd_part = kd_loss(lattice, *soft_labels, *amap);
  result.loss = (1.0 - cfg.alpha) * ctc_part + cfg.alpha * kd_part;
  Matrix grad_ctc = ctc_grad(lattice, labels);
  const Matrix grad_kd = kd_grad(lattice, *soft_labels, *amap);
  for (size_t i = 0; i < grad_ctc.data.size(); ++i) {
    grad_ctc.data[i] =
        (1.0 - cfg.alpha) * grad_ctc.data[i] + cfg.alpha * grad_kd.data[i];
  }
  result.grad = std::move(grad_ctc);
  return result;
}

namespace {

double round_sig(double value, int digits) {
  std::istringstream in(format_double(value, digits));
  double out = 0.0;
  in >> out;
  return out;
}

void validate_soft_label_set(const SoftLabelSet& set, int vocab_size,
                             const std::string& source_name) {
  for (const auto& position : set.positions) {
    double sum = 0.0;
    std::vector<char> seen(vocab_size, 0);
    for (const auto& [token, prob] : position.entries) {
      if (token < 0 || token >= vocab_size) {
        throw InvalidInputError(source_name + ": soft label for '" +
                                set.utt_id + "' references token " +
                                std::to_string(token) +
                                " outside the vocabulary");
      }
      if (seen[token]) {
        throw InvalidInputError(source_name + ": duplicate token in '" +
                                set.utt_id + "' soft label");
      }
      seen[token] = 1;
      if (prob < 0.0) {
        throw InvalidInputError(source_name + ": negative probability in '" +
                                set.utt_id + "'");
      }
      sum += prob;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw InvalidInputError(source_name + ": soft label for '" + set.utt_id +
                              "' sums to " + std::to_string(sum));
    }
  }
}

}  // namespace

void write_soft_labels(std::ostream& out, std::span<const SoftLabelSet> sets) {
  for (const auto& set : sets) {
    nlohmann::json positions = nlohmann::json::array();
    for (const auto& position : set.positions) {
      nlohmann::json entries = nlohmann::json::array();
      for (const auto& [token, prob] : position.entries) {
        entries.push_back({token, round_sig(prob, 12)});
      }
      positions.push_back(std::move(entries));
    }
    nlohmann::json line;
    line["utt_id"] = set.utt_id;
    line["positions"] = std::move(positions);
    out << line.dump() << '\n';
  }
}

void write_soft_labels(const std::string& path,
                       std::span<const SoftLabelSet> sets) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
  write_soft_labels(out, sets);
}

std::vector<SoftLabelSet> read_soft_labels(std::istream& in, int vocab_size,
                                           const std::string& source_name) {
  std::vector<SoftLabelSet> sets;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source_name + ": " + e.what(), line_no);
    }
    SoftLabelSet set;
    try {
      set.utt_id = doc.at("utt_id").get<std::string>();
      for (const auto& position : doc.at("positions")) {
        SoftLabel label;
        for (const auto& entry : position) {
          label.entries.emplace_back(entry.at(0).get<int>(),
                                     entry.at(1).get<double>());
        }
        set.positions.push_back(std::move(label));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source_name + ": " + e.what(), line_no);
    }
    validate_soft_label_set(set, vocab_size, source_name);
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<SoftLabelSet> read_soft_labels(const std::string& path,
                                           int vocab_size) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open '" + path + "' for reading");
  return read_soft_labels(in, vocab_size, path);
}

std::unordered_map<std::string, SoftLabelSet> index_soft_labels(
    std::vector<SoftLabelSet> sets) {
  std::unordered_map<std::string, SoftLabelSet> index;
  index.reserve(sets.size());
  for (auto& set : sets) {
    std::string key = set.utt_id;
    if (!index.emplace(std::move(key), std::move(set)).second) {
      throw InvalidInputError("duplicate soft-label utterance id");
    }
  }
  return index;
}

}  // namespace ctckd
