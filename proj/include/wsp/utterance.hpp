// wsp/utterance.hpp
#pragma once

#include <string>
#include <vector>

namespace wsp {

using TokenSeq = std::vector<std::string>;

struct Utterance {
  std::string id;
  TokenSeq tokens;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const Utterance&) const = default;
};

using Corpus = std::vector<Utterance>;

}  // namespace wsp
