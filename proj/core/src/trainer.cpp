#include "ctckd/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "ctckd/decode.hpp"
#include "ctckd/errors.hpp"
#include "ctckd/lattice_io.hpp"
#include "ctckd/metrics.hpp"
#include "ctckd/rng.hpp"

namespace ctckd {

void TrainConfig::validate() const {
  if (pretrain_epochs < 0 || kd_epochs < 0) {
    throw InvalidInputError("epoch counts must be >= 0");
  }
  if (alpha < 0.0 || alpha > 1.0) {
    throw InvalidInputError("alpha must lie in [0, 1]");
  }
  if (learning_rate <= 0.0) {
    throw InvalidInputError("learning rate must be positive");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw InvalidInputError("momentum must lie in [0, 1)");
  }
  if (batch_size < 1) throw InvalidInputError("batch size must be >= 1");
  if (top_k < 1) throw InvalidInputError("top_k must be >= 1");
  if (temperature <= 0.0) {
    throw InvalidInputError("temperature must be positive");
  }
  if (freeze_alignment_epochs < 0) {
    throw InvalidInputError("freeze_alignment_epochs must be >= 0");
  }
  if (context_radius < 0) throw InvalidInputError("context radius < 0");
  if (hidden_dim < 1) throw InvalidInputError("hidden dim must be >= 1");
}

namespace {

int infer_vocab_size(const Corpus& corpus) {
  int max_token = -1;
  for (const auto& utt : corpus.utterances) {
    for (int token : utt.transcript) max_token = std::max(max_token, token);
  }
  return max_token + 1;
}

struct DevScore {
  double ter = 0.0;
  double ppl = 0.0;
  bool has_ppl = false;
};

DevScore score_dev(const TinyEncoder& model, const Corpus& dev,
                   const MaskedScorer* teacher) {
  int64_t errors = 0, ref_len = 0, hyp_len = 0;
  double nll = 0.0;
  for (const auto& utt : dev.utterances) {
    const auto lattice = model.lattice(utt.utt_id, utt.features);
    const auto hyp = greedy_decode(lattice);
    errors += edit_distance(hyp.tokens, utt.transcript).distance();
    ref_len += static_cast<int64_t>(utt.transcript.size());
    if (teacher != nullptr && !hyp.tokens.empty()) {
      nll += pseudo_ppl(*teacher, hyp.tokens) * hyp.length();
      hyp_len += hyp.length();
    }
  }
  DevScore score;
  score.ter = ref_len > 0 ? static_cast<double>(errors) /
                                static_cast<double>(ref_len)
                          : 0.0;
  if (teacher != nullptr && hyp_len > 0) {
    score.has_ppl = true;
    score.ppl = nll / static_cast<double>(hyp_len);
  }
  return score;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Corpus& train_corpus,
                  const Corpus& dev_corpus,
                  const std::unordered_map<std::string, SoftLabelSet>*
                      soft_labels,
                  const MaskedScorer* dev_teacher) {
  cfg.validate();
  if (train_corpus.utterances.empty()) {
    throw EmptyCorpusError("training corpus is empty");
  }
  const int vocab_size =
      std::max(infer_vocab_size(train_corpus), infer_vocab_size(dev_corpus));
  const int feature_dim = train_corpus.utterances.front().features.cols;
  const int total_epochs = cfg.pretrain_epochs + cfg.kd_epochs;

  const bool needs_labels =
      cfg.teacher != TeacherKind::kOneHot && cfg.alpha > 0.0 &&
      (cfg.kd_epochs > 0 || cfg.from_scratch);
  if (needs_labels) {
    if (soft_labels == nullptr) {
      throw InvalidInputError(
          "KD training with a non-one-hot teacher needs soft labels");
    }
    for (const auto& utt : train_corpus.utterances) {
      if (soft_labels->find(utt.utt_id) == soft_labels->end()) {
        throw InvalidInputError("no soft labels for utterance '" +
                                utt.utt_id + "'");
      }
    }
  }

  // One-hot targets are synthesized once up front.
  std::unordered_map<std::string, SoftLabelSet> one_hot;
  if (cfg.teacher == TeacherKind::kOneHot) {
    for (const auto& utt : train_corpus.utterances) {
      one_hot.emplace(utt.utt_id,
                      one_hot_labels(LabelSequence{utt.utt_id, utt.transcript}));
    }
  }
  const auto* labels_by_id =
      cfg.teacher == TeacherKind::kOneHot ? &one_hot : soft_labels;

  TrainResult result;
  result.model = TinyEncoder::init(feature_dim, cfg.context_radius,
                                   cfg.hidden_dim, vocab_size + 1, cfg.seed);
  TinyEncoder& model = result.model;
  EncoderGrads velocity = model.zero_grads();
  EncoderGrads batch_grads = model.zero_grads();
  EncoderGrads utt_grads = model.zero_grads();

  std::unordered_map<std::string, AlignmentMap> frozen_alignments;

  const int n_train = static_cast<int>(train_corpus.utterances.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const bool kd_phase = cfg.from_scratch || epoch >= cfg.pretrain_epochs;
    const int kd_epoch_index =
        cfg.from_scratch ? epoch : epoch - cfg.pretrain_epochs;
    const double alpha = kd_phase ? cfg.alpha : 0.0;
    const bool freeze = kd_phase && kd_epoch_index < cfg.freeze_alignment_epochs;

    DistillConfig step_cfg;
    step_cfg.top_k = cfg.top_k;
    step_cfg.temperature = cfg.temperature;
    step_cfg.alpha = alpha;
    step_cfg.variant = cfg.variant;
    step_cfg.teacher = cfg.teacher;

    Rng shuffle_rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL + epoch));
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int processed = 0, skipped = 0;

    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int end = std::min(n_train, start + cfg.batch_size);
      batch_grads.zero();
      int batch_count = 0;
      for (int k = start; k < end; ++k) {
        const Utterance& utt = train_corpus.utterances[order[k]];
        const LabelSequence labels{utt.utt_id, utt.transcript};
        const SoftLabelSet* utt_labels = nullptr;
        if (alpha > 0.0) {
          utt_labels = &labels_by_id->at(utt.utt_id);
        }
        try {
          const auto lattice = model.lattice(utt.utt_id, utt.features);
          const AlignmentMap* fixed = nullptr;
          AlignmentMap fresh;
          if (alpha > 0.0 && freeze) {
            auto it = frozen_alignments.find(utt.utt_id);
            if (it == frozen_alignments.end()) {
              const CtcPath path = forced_align(lattice, labels);
              fresh = alignment_map(path, labels, lattice.blank_id(),
                                    cfg.variant);
              it = frozen_alignments.emplace(utt.utt_id, std::move(fresh))
                       .first;
            }
            fixed = &it->second;
          }
          const auto combined =
              combined_loss(lattice, labels, utt_labels, step_cfg, fixed);
          utt_grads.zero();
          model.backward(utt.features, combined.grad, utt_grads);
          batch_grads.add_scaled(utt_grads, 1.0);
          loss_sum += combined.loss;
          ++processed;
          ++batch_count;
        } catch (const InfeasibleAlignmentError&) {
          ++skipped;
        }
      }
      if (batch_count == 0) continue;
      // Mean gradient over the batch, then momentum SGD.
      const double scale = -cfg.learning_rate / batch_count;
      for (size_t i = 0; i < velocity.w1.size(); ++i) {
        velocity.w1[i] =
            cfg.momentum * velocity.w1[i] + scale * batch_grads.w1[i];
      }
      for (size_t i = 0; i < velocity.b1.size(); ++i) {
        velocity.b1[i] =
            cfg.momentum * velocity.b1[i] + scale * batch_grads.b1[i];
      }
      for (size_t i = 0; i < velocity.w2.size(); ++i) {
        velocity.w2[i] =
            cfg.momentum * velocity.w2[i] + scale * batch_grads.w2[i];
      }
      for (size_t i = 0; i < velocity.b2.size(); ++i) {
        velocity.b2[i] =
            cfg.momentum * velocity.b2[i] + scale * batch_grads.b2[i];
      }
      model.apply_update(velocity);
    }

    result.skipped_utterances += skipped;
    if (skipped > 0 &&
        static_cast<double>(skipped) > 0.01 * static_cast<double>(n_train)) {
      throw InfeasibleAlignmentError(
          std::to_string(skipped) + " of " + std::to_string(n_train) +
          " utterances infeasible in epoch " + std::to_string(epoch + 1));
    }

    EpochMetrics metrics;
    metrics.epoch = epoch + 1;
    metrics.phase = kd_phase ? "kd" : "pretrain";
    metrics.train_loss = processed > 0 ? loss_sum / processed : 0.0;
    const DevScore dev = score_dev(model, dev_corpus, dev_teacher);
    metrics.dev_ter = dev.ter;
    metrics.dev_ppl = dev.ppl;
    metrics.has_dev_ppl = dev.has_ppl;
    result.history.push_back(std::move(metrics));
  }
  return result;
}

double grad_check(const TinyEncoder& model, const Utterance& utt,
                  const SoftLabelSet* soft_labels, double alpha,
                  double step) {
  const LabelSequence labels{utt.utt_id, utt.transcript};
  DistillConfig cfg;
  cfg.alpha = alpha;

  // Alignment fixed at the unperturbed parameters.
  AlignmentMap amap;
  const AlignmentMap* fixed = nullptr;
  if (alpha > 0.0) {
    const auto lattice = model.lattice(utt.utt_id, utt.features);
    const CtcPath path = forced_align(lattice, labels);
    amap = alignment_map(path, labels, lattice.blank_id(), cfg.variant);
    fixed = &amap;
  }

  TinyEncoder probe = model;
  const auto loss_at = [&]() {
    const auto lattice = probe.lattice(utt.utt_id, utt.features);
    return combined_loss(lattice, labels, soft_labels, cfg, fixed).loss;
  };

  const auto lattice = model.lattice(utt.utt_id, utt.features);
  const auto combined = combined_loss(lattice, labels, soft_labels, cfg, fixed);
  EncoderGrads grads = model.zero_grads();
  model.backward(utt.features, combined.grad, grads);
  const auto analytic = model.flatten_grads(grads);

  auto params = probe.parameter_view();
  double worst = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + step;
    const double up = loss_at();
    *params[i] = saved - step;
    const double down = loss_at();
    *params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double scale = std::max(1.0, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

void write_history_csv(std::ostream& out,
                       std::span<const EpochMetrics> history) {
  out << "epoch,phase,train_loss,dev_ter,dev_ppl\n";
  for (const auto& row : history) {
    out << row.epoch << ',' << row.phase << ','
        << format_double(row.train_loss, 12) << ','
        << format_double(row.dev_ter, 12) << ','
        << (row.has_dev_ppl ? format_double(row.dev_ppl, 12) : "nan") << '\n';
  }
}

void write_history_csv(const std::string& path,
                       std::span<const EpochMetrics> history) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
  write_history_csv(out, history);
}

}  // namespace ctckd
