#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctckd/distill.hpp"
#include "ctckd/encoder.hpp"
#include "ctckd/synth.hpp"

namespace ctckd {

struct TrainConfig {
  int pretrain_epochs = 30;  // plain CTC phase
  int kd_epochs = 30;        // interpolated-objective phase
  double alpha = 0.5;
  int top_k = 8;
  double temperature = 3.0;
  AlignmentVariant variant = AlignmentVariant::kAll;
  TeacherKind teacher = TeacherKind::kMasked;
  double learning_rate = 0.08;
  double momentum = 0.9;
  int batch_size = 16;
  uint64_t seed = 1;
  // KD applied from the first epoch; the pretrain phase also uses the
  // interpolated objective. Total epoch count is unchanged.
  bool from_scratch = false;
  // Reuse each utterance's alignment from its first KD-phase computation for
  // this many KD epochs instead of recomputing every step. 0 = always fresh.
  int freeze_alignment_epochs = 0;
  int context_radius = 1;
  int hidden_dim = 64;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;            // 1-based over the whole run
  std::string phase;        // "pretrain" or "kd"
  double train_loss = 0.0;  // mean combined loss per utterance
  double dev_ter = 0.0;     // greedy token error rate on the dev set
  double dev_ppl = 0.0;     // teacher pseudo-perplexity of greedy dev output
  bool has_dev_ppl = false;
};

struct TrainResult {
  TinyEncoder model;
  std::vector<EpochMetrics> history;
  int skipped_utterances = 0;  // infeasible, across all epochs
};

// SGD with momentum on the combined objective. Deterministic given the
// config: fixed per-epoch shuffles, fixed batch iteration order. Utterances
// whose lattice cannot carry the transcript are skipped and counted; more
// than 1% skips in an epoch aborts the run.
//
// `soft_labels` is required when kd epochs run with a non-one-hot teacher;
// one-hot targets are synthesized from the transcripts. `dev_teacher` adds
// the dev pseudo-perplexity column.
TrainResult train(const TrainConfig& cfg, const Corpus& train_corpus,
                  const Corpus& dev_corpus,
                  const std::unordered_map<std::string, SoftLabelSet>*
                      soft_labels = nullptr,
                  const MaskedScorer* dev_teacher = nullptr);

// Max relative error between the backpropagated gradient of the combined
// loss and central finite differences, over every encoder parameter. The
// alignment is computed once at the unperturbed point and held fixed during
// the check.
double grad_check(const TinyEncoder& model, const Utterance& utt,
                  const SoftLabelSet* soft_labels, double alpha,
                  double step = 1e-4);

// Metrics history CSV: epoch,phase,train_loss,dev_ter,dev_ppl.
void write_history_csv(std::ostream& out,
                       std::span<const EpochMetrics> history);
void write_history_csv(const std::string& path,
                       std::span<const EpochMetrics> history);

}  // namespace ctckd
