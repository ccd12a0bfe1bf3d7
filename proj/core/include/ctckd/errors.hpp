#pragma once

#include <stdexcept>
#include <string>

namespace ctckd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad data handed to the toolkit: malformed files, inconsistent shapes,
// unknown tokens. The CLI maps this family to exit code 2.
struct InvalidInputError : Error {
  using Error::Error;
};

// Parse failure with a 1-based line number when one is known.
struct ParseError : InvalidInputError {
  explicit ParseError(const std::string& msg, long line_number = -1)
      : InvalidInputError(line_number >= 0
                              ? msg + " (line " + std::to_string(line_number) + ")"
                              : msg),
        line(line_number) {}
  long line;
};

// No valid CTC path maps the lattice onto the label sequence (T shorter than
// the minimum path length). Surfaced as data trouble, never as an infinite
// loss. CLI exit code 3.
struct InfeasibleAlignmentError : Error {
  using Error::Error;
};

// collapse(path) disagrees with the label sequence it is claimed to align.
struct PathMismatchError : Error {
  using Error::Error;
};

// Parallel containers (soft labels vs. alignment map vs. lattice) disagree
// about lengths or index ranges.
struct IndexMismatchError : Error {
  using Error::Error;
};

struct EmptyCorpusError : InvalidInputError {
  using InvalidInputError::InvalidInputError;
};

}  // namespace ctckd
