// src/manifest.cpp
#include "wsp/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "wsp/error.hpp"
#include "wsp/textkit.hpp"

namespace wsp {

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    j["id"] = row.id;
    j["audio_path"] = row.audio_path;
    j["text"] = row.text;
    j["start_s"] = row.start_s;
    j["end_s"] = row.end_s;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open manifest " + path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ManifestRow row;
      row.id = j.at("id").get<std::string>();
      row.audio_path = j.at("audio_path").get<std::string>();
      row.text = j.at("text").get<std::string>();
      row.start_s = j.value("start_s", 0.0);
      row.end_s = j.value("end_s", 0.0);
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

Utterance to_utterance(const ManifestRow& row) {
  return Utterance{row.id, textkit::normalize(row.text), row.start_s, row.end_s};
}

Corpus to_corpus(const std::vector<ManifestRow>& rows) {
  Corpus out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(to_utterance(r));
  return out;
}

std::vector<ManifestRow> with_texts(const std::vector<ManifestRow>& rows, const Corpus& corpus) {
  if (rows.size() != corpus.size()) throw Error(Errc::dimension_mismatch, "manifest and corpus sizes differ");
  std::vector<ManifestRow> out = rows;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].id != corpus[i].id) throw Error(Errc::parse, "utterance id mismatch: " + out[i].id + " vs " + corpus[i].id);
    out[i].text = textkit::join(corpus[i].tokens);
  }
  return out;
}

}  // namespace wsp
