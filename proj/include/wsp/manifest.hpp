// wsp/manifest.hpp
//
// Corpus manifests: one JSON object per line with the fields
// {id, audio_path, text, start_s, end_s}. audio_path is relative to the
// manifest's directory.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wsp/utterance.hpp"

namespace wsp {

struct ManifestRow {
  std::string id;
  std::string audio_path;
  std::string text;
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const ManifestRow&) const = default;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

Utterance to_utterance(const ManifestRow& row);
Corpus to_corpus(const std::vector<ManifestRow>& rows);

// Rows with `text` replaced by the matching utterance's tokens (matched by
// position; ids must agree).
std::vector<ManifestRow> with_texts(const std::vector<ManifestRow>& rows, const Corpus& corpus);

}  // namespace wsp
