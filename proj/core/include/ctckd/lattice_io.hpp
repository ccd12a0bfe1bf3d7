#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ctckd/types.hpp"

namespace ctckd {

// Lattice text format, one or more utterances concatenated:
//   line 1:      utt_id T V
//   lines 2..T+1: V+1 whitespace-separated natural-log probabilities,
//                blank last.
// Values are written with 17 significant digits so that read(write(x)) is
// bit-exact.
std::vector<PosteriorLattice> read_lattices(std::istream& in,
                                            const std::string& source_name);
std::vector<PosteriorLattice> read_lattices(const std::string& path);
void write_lattices(std::ostream& out, std::span<const PosteriorLattice> lats);
void write_lattices(const std::string& path,
                    std::span<const PosteriorLattice> lats);

// Vocabulary file: a JSON array of token strings. Blank is implicit.
Vocabulary read_vocabulary(const std::string& path);
void write_vocabulary(const std::string& path, const Vocabulary& vocab);

// Transcript format, one utterance per line: `utt_id token token ...`.
std::vector<LabelSequence> read_transcripts(std::istream& in,
                                            const Vocabulary& vocab,
                                            const std::string& source_name);
std::vector<LabelSequence> read_transcripts(const std::string& path,
                                            const Vocabulary& vocab);
void write_transcripts(std::ostream& out, std::span<const LabelSequence> utts,
                       const Vocabulary& vocab);
void write_transcripts(const std::string& path,
                       std::span<const LabelSequence> utts,
                       const Vocabulary& vocab);

// Shared formatting helper: shortest decimal form with `digits` significant
// digits ("%.*g").
std::string format_double(double value, int digits = 17);

}  // namespace ctckd
