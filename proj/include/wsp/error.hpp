// wsp/error.hpp
#pragma once

#include <stdexcept>
#include <string>

namespace wsp {

enum class Errc {
  usage,
  empty_reference,
  empty_corpus,
  empty_vocab,
  invalid_charset,
  bad_magic,
  truncated,
  dimension_mismatch,
  label_too_long,
  non_finite_loss,
  missing_checkpoint,
  parse,
  io,
};

const char* to_string(Errc code);

// Single exception type for the workbench. The code drives the CLI exit
// status: usage errors map to 1, everything else is a data error (2).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::usage: return "usage";
    case Errc::empty_reference: return "empty-reference";
    case Errc::empty_corpus: return "empty-corpus";
    case Errc::empty_vocab: return "empty-vocab";
    case Errc::invalid_charset: return "invalid-charset";
    case Errc::bad_magic: return "bad-magic";
    case Errc::truncated: return "truncated-file";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::label_too_long: return "label-too-long";
    case Errc::non_finite_loss: return "non-finite-loss";
    case Errc::missing_checkpoint: return "missing-checkpoint";
    case Errc::parse: return "parse";
    case Errc::io: return "io";
  }
  return "unknown";
}

}  // namespace wsp
