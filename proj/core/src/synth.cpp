#include "ctckd/synth.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ctckd/errors.hpp"
#include "ctckd/lattice_io.hpp"
#include "ctckd/rng.hpp"

namespace ctckd {

void SyntheticCorpusSpec::validate() const {
  if (vocab_size < 1) throw InvalidInputError("spec needs vocab_size >= 1");
  if (feature_dim < 1) throw InvalidInputError("spec needs feature_dim >= 1");
  if (static_cast<int>(initial.size()) != vocab_size ||
      transitions.rows != vocab_size || transitions.cols != vocab_size) {
    throw InvalidInputError("spec transition tables have wrong shape");
  }
  for (int u = 0; u < vocab_size; ++u) {
    double row_sum = 0.0;
    for (int v = 0; v < vocab_size; ++v) {
      const double p = transitions.at(u, v);
      if (p < 0.0) throw InvalidInputError("negative transition probability");
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > 1e-9) {
      throw InvalidInputError("transition row " + std::to_string(u) +
                              " is not stochastic");
    }
  }
  if (static_cast<int>(token_means.size()) != vocab_size) {
    throw InvalidInputError("spec needs one mean vector per token");
  }
  for (const auto& mean : token_means) {
    if (static_cast<int>(mean.size()) != feature_dim) {
      throw InvalidInputError("mean vector dimension mismatch");
    }
  }
  for (const auto& [a, b] : confusable_pairs) {
    if (a < 0 || a >= vocab_size || b < 0 || b >= vocab_size || a == b) {
      throw InvalidInputError("bad confusable pair");
    }
    if (token_means[a] != token_means[b]) {
      throw InvalidInputError("confusable pair must share emission means");
    }
  }
  if (noise_sigma < 0.0) throw InvalidInputError("noise sigma must be >= 0");
  if (min_frames_per_token < 1 ||
      max_frames_per_token < min_frames_per_token) {
    throw InvalidInputError("bad frames-per-token range");
  }
  if (min_silence_frames < 0 || max_silence_frames < min_silence_frames) {
    throw InvalidInputError("bad silence range");
  }
  if (min_tokens < 1 || max_tokens < min_tokens) {
    throw InvalidInputError("bad utterance length range");
  }
}

Corpus generate_corpus(const SyntheticCorpusSpec& spec, int n_utts,
                       const std::string& utt_prefix) {
  spec.validate();
  Rng rng(spec.seed);
  Corpus corpus;
  corpus.utterances.reserve(n_utts);
  std::vector<double> row(spec.vocab_size);
  for (int u = 0; u < n_utts; ++u) {
    Utterance utt;
    char name[64];
    std::snprintf(name, sizeof(name), "%s%06d", utt_prefix.c_str(), u);
    utt.utt_id = name;

    const int length = rng.uniform_int(spec.min_tokens, spec.max_tokens);
    utt.transcript.reserve(length);
    int current = rng.categorical(spec.initial);
    utt.transcript.push_back(current);
    for (int i = 1; i < length; ++i) {
      for (int v = 0; v < spec.vocab_size; ++v) {
        row[v] = spec.transitions.at(current, v);
      }
      current = rng.categorical(row);
      utt.transcript.push_back(current);
    }

    std::vector<std::vector<double>> frames;
    auto emit = [&](const std::vector<double>* mean, int count) {
      for (int f = 0; f < count; ++f) {
        std::vector<double> frame(spec.feature_dim);
        for (int d = 0; d < spec.feature_dim; ++d) {
          const double center = mean != nullptr ? (*mean)[d] : 0.0;
          frame[d] = center + (spec.noise_sigma > 0.0
                                   ? rng.normal(0.0, spec.noise_sigma)
                                   : 0.0);
        }
        frames.push_back(std::move(frame));
      }
    };

    emit(nullptr, rng.uniform_int(spec.min_silence_frames,
                                  spec.max_silence_frames));
    for (int token : utt.transcript) {
      emit(&spec.token_means[token],
           rng.uniform_int(spec.min_frames_per_token,
                           spec.max_frames_per_token));
      emit(nullptr, rng.uniform_int(spec.min_silence_frames,
                                    spec.max_silence_frames));
    }

    utt.features = Matrix(static_cast<int>(frames.size()), spec.feature_dim);
    for (size_t t = 0; t < frames.size(); ++t) {
      for (int d = 0; d < spec.feature_dim; ++d) {
        utt.features.at(static_cast<int>(t), d) = frames[t][d];
      }
    }
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

std::vector<LabelSequence> Corpus::transcripts() const {
  std::vector<LabelSequence> out;
  out.reserve(utterances.size());
  for (const auto& utt : utterances) {
    out.push_back(LabelSequence{utt.utt_id, utt.transcript});
  }
  return out;
}

SyntheticCorpusSpec standard_corpus_spec(uint64_t seed) {
  SyntheticCorpusSpec spec;
  spec.vocab_size = 20;
  spec.feature_dim = 8;
  spec.seed = seed;
  spec.noise_sigma = 0.35;
  spec.min_frames_per_token = 1;
  spec.max_frames_per_token = 2;
  spec.min_silence_frames = 0;
  spec.max_silence_frames = 1;
  spec.min_tokens = 6;
  spec.max_tokens = 10;

  const int V = spec.vocab_size;
  const int cue_a = 0, cue_b = 1;   // left cues
  const int tok_a = 18, tok_b = 19; // the confusable pair

  // Token means: fixed pseudo-random directions, independent of spec.seed
  // so that every seed shares one acoustic inventory.
  Rng mean_rng(0x5eedf00dULL);
  spec.token_means.assign(V, std::vector<double>(spec.feature_dim, 0.0));
  for (int v = 0; v < V; ++v) {
    double norm = 0.0;
    for (int d = 0; d < spec.feature_dim; ++d) {
      spec.token_means[v][d] = mean_rng.normal();
      norm += spec.token_means[v][d] * spec.token_means[v][d];
    }
    norm = std::sqrt(norm);
    for (int d = 0; d < spec.feature_dim; ++d) {
      spec.token_means[v][d] *= 1.5 / norm;
    }
  }
  spec.token_means[tok_b] = spec.token_means[tok_a];
  spec.confusable_pairs = {{tok_a, tok_b}};

  // Transitions. Filler tokens 2..17 move mostly among themselves and feed
  // the cues; cue_a forces tok_a next, cue_b forces tok_b; the pair members
  // prefer disjoint successor sets, so both neighbours are informative.
  spec.transitions = Matrix(V, V, 0.0);
  auto spread = [&](int from, const std::vector<int>& to, double mass) {
    for (int v : to) spec.transitions.at(from, v) += mass / to.size();
  };
  std::vector<int> fillers;
  for (int v = 2; v <= 17; ++v) fillers.push_back(v);
  for (int from : fillers) {
    std::vector<int> others;
    for (int v : fillers) {
      if (v != from) others.push_back(v);
    }
    spread(from, others, 0.64);
    spread(from, {cue_a}, 0.22);
    spread(from, {cue_b}, 0.14);
  }
  spread(cue_a, {tok_a}, 0.85);
  spread(cue_a, fillers, 0.15);
  spread(cue_b, {tok_b}, 0.85);
  spread(cue_b, fillers, 0.15);
  spread(tok_a, {2, 3, 4}, 0.85);
  spread(tok_a, {8, 9, 10, 11, 12, 13}, 0.15);
  spread(tok_b, {5, 6, 7}, 0.85);
  spread(tok_b, {8, 9, 10, 11, 12, 13}, 0.15);

  spec.initial.assign(V, 0.0);
  for (int v : fillers) spec.initial[v] = 1.0 / fillers.size();

  return spec;
}

Vocabulary spec_vocabulary(const SyntheticCorpusSpec& spec) {
  std::vector<std::string> tokens;
  tokens.reserve(spec.vocab_size);
  for (int v = 0; v < spec.vocab_size; ++v) {
    char name[16];
    std::snprintf(name, sizeof(name), "w%02d", v);
    tokens.emplace_back(name);
  }
  return Vocabulary(std::move(tokens));
}

void write_features(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
  for (const auto& utt : corpus.utterances) {
    out << utt.utt_id << ' ' << utt.features.rows << ' ' << utt.features.cols
        << '\n';
    for (int t = 0; t < utt.features.rows; ++t) {
      const auto row = utt.features.row(t);
      for (int d = 0; d < utt.features.cols; ++d) {
        if (d > 0) out << ' ';
        out << format_double(row[d]);
      }
      out << '\n';
    }
  }
}

std::vector<std::pair<std::string, Matrix>> read_features(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open '" + path + "' for reading");
  std::vector<std::pair<std::string, Matrix>> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream header(line);
    std::string utt_id;
    long t_count = 0, dim = 0;
    if (!(header >> utt_id >> t_count >> dim)) {
      if (utt_id.empty()) continue;
      throw ParseError(path + ": malformed feature header", line_no);
    }
    if (t_count < 1 || dim < 1) {
      throw ParseError(path + ": feature header needs T >= 1, D >= 1",
                       line_no);
    }
    Matrix features(static_cast<int>(t_count), static_cast<int>(dim));
    for (long t = 0; t < t_count; ++t) {
      if (!std::getline(in, line)) {
        throw ParseError(path + ": unexpected end of file in '" + utt_id + "'",
                         line_no);
      }
      ++line_no;
      const char* cursor = line.c_str();
      for (long d = 0; d < dim; ++d) {
        char* end = nullptr;
        const double value = std::strtod(cursor, &end);
        if (end == cursor) {
          throw ParseError(path + ": expected " + std::to_string(dim) +
                               " feature values",
                           line_no);
        }
        features.at(static_cast<int>(t), static_cast<int>(d)) = value;
        cursor = end;
      }
    }
    out.emplace_back(std::move(utt_id), std::move(features));
  }
  return out;
}

}  // namespace ctckd
