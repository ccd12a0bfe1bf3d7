#include "ctckd/lattice_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctckd/errors.hpp"

namespace ctckd {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

std::string format_double(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
  return buf;
}

std::vector<PosteriorLattice> read_lattices(std::istream& in,
                                            const std::string& source_name) {
  std::vector<PosteriorLattice> lattices;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream header(line);
    std::string utt_id;
    long t_count = 0, v_count = 0;
    if (!(header >> utt_id >> t_count >> v_count)) {
      if (utt_id.empty() && header.eof()) continue;  // blank separator line
      throw ParseError(source_name + ": malformed lattice header", line_no);
    }
    std::string trailing;
    if (header >> trailing) {
      throw ParseError(source_name + ": trailing text after lattice header",
                       line_no);
    }
    if (t_count < 1 || v_count < 1) {
      throw ParseError(source_name + ": lattice header needs T >= 1, V >= 1",
                       line_no);
    }
    Matrix rows(static_cast<int>(t_count), static_cast<int>(v_count) + 1);
    for (long t = 0; t < t_count; ++t) {
      if (!std::getline(in, line)) {
        throw ParseError(source_name + ": unexpected end of file inside '" +
                             utt_id + "'",
                         line_no);
      }
      ++line_no;
      const char* cursor = line.c_str();
      for (long v = 0; v <= v_count; ++v) {
        char* end = nullptr;
        double value = std::strtod(cursor, &end);
        if (end == cursor) {
          throw ParseError(source_name + ": expected " +
                               std::to_string(v_count + 1) +
                               " log-probabilities",
                           line_no);
        }
        rows.at(static_cast<int>(t), static_cast<int>(v)) = value;
        cursor = end;
      }
      while (*cursor == ' ' || *cursor == '\t' || *cursor == '\r') ++cursor;
      if (*cursor != '\0') {
        throw ParseError(source_name + ": trailing text after row", line_no);
      }
    }
    try {
      lattices.emplace_back(utt_id, std::move(rows));
    } catch (const InvalidInputError& e) {
      throw ParseError(source_name + ": " + e.what(), line_no);
    }
  }
  return lattices;
}

std::vector<PosteriorLattice> read_lattices(const std::string& path) {
  auto in = open_input(path);
  return read_lattices(in, path);
}

void write_lattices(std::ostream& out,
                    std::span<const PosteriorLattice> lats) {
  for (const auto& lat : lats) {
    out << lat.utt_id() << ' ' << lat.frames() << ' ' << lat.vocab_size()
        << '\n';
    for (int t = 0; t < lat.frames(); ++t) {
      auto row = lat.row(t);
      for (int v = 0; v < lat.num_classes(); ++v) {
        if (v > 0) out << ' ';
        out << format_double(row[v]);
      }
      out << '\n';
    }
  }
}

void write_lattices(const std::string& path,
                    std::span<const PosteriorLattice> lats) {
  auto out = open_output(path);
  write_lattices(out, lats);
}

Vocabulary read_vocabulary(const std::string& path) {
  auto in = open_input(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw ParseError(path + ": vocabulary must be a JSON array of strings");
  }
  std::vector<std::string> tokens;
  tokens.reserve(doc.size());
  for (const auto& item : doc) {
    if (!item.is_string()) {
      throw ParseError(path + ": vocabulary entries must be strings");
    }
    tokens.push_back(item.get<std::string>());
  }
  return Vocabulary(std::move(tokens));
}

void write_vocabulary(const std::string& path, const Vocabulary& vocab) {
  auto out = open_output(path);
  out << nlohmann::json(vocab.tokens()).dump() << '\n';
}

std::vector<LabelSequence> read_transcripts(std::istream& in,
                                            const Vocabulary& vocab,
                                            const std::string& source_name) {
  std::vector<LabelSequence> utts;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string utt_id;
    if (!(fields >> utt_id)) continue;  // skip blank lines
    LabelSequence seq;
    seq.utt_id = utt_id;
    std::string token;
    while (fields >> token) {
      auto id = vocab.find(token);
      if (!id) {
        throw ParseError(source_name + ": unknown token '" + token + "'",
                         line_no);
      }
      seq.tokens.push_back(*id);
    }
    utts.push_back(std::move(seq));
  }
  return utts;
}

std::vector<LabelSequence> read_transcripts(const std::string& path,
                                            const Vocabulary& vocab) {
  auto in = open_input(path);
  return read_transcripts(in, vocab, path);
}

void write_transcripts(std::ostream& out, std::span<const LabelSequence> utts,
                       const Vocabulary& vocab) {
  for (const auto& utt : utts) {
    out << utt.utt_id;
    for (int token : utt.tokens) out << ' ' << vocab.token(token);
    out << '\n';
  }
}

void write_transcripts(const std::string& path,
                       std::span<const LabelSequence> utts,
                       const Vocabulary& vocab) {
  auto out = open_output(path);
  write_transcripts(out, utts, vocab);
}

}  // namespace ctckd
