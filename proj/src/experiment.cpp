// src/experiment.cpp
#include "wsp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "wsp/checkpoint.hpp"
#include "wsp/decode.hpp"
#include "wsp/error.hpp"
#include "wsp/feature_io.hpp"
#include "wsp/manifest.hpp"
#include "wsp/rng.hpp"
#include "wsp/synth.hpp"
#include "wsp/textkit.hpp"

namespace wsp::harness {

namespace fs = std::filesystem;
using acoustic::Sample;

CellSpec CellSpec::canonical() const {
  CellSpec c = *this;
  if (regime == Regime::direct_ft || regime == Regime::self_training || fraction == 0.0) {
    c.mode = corruptor::Mode::random;
  }
  if (regime == Regime::direct_ft || regime == Regime::self_training) c.fraction = 0.0;
  return c;
}

std::string cell_key(const CellSpec& spec) {
  const CellSpec c = spec.canonical();
  if (c.regime == Regime::direct_ft || c.regime == Regime::self_training) {
    return fmt::format("{}/seed{}", to_string(c.regime), c.seed);
  }
  return fmt::format("{}/{}/{:.2f}/seed{}", to_string(c.regime), corruptor::to_string(c.mode), c.fraction, c.seed);
}

std::string cell_id(const CellSpec& spec, const WorkbenchConfig& cfg) {
  WorkbenchConfig relevant = cfg;
  relevant.sweep = SweepConfig{};  // the grid does not change a cell's output
  relevant.experiment.decode = DecodeMode::both;
  std::uint64_t h = fnv1a64(cell_key(spec));
  h = fnv1a64("\n", h);
  h = fnv1a64(dump_config(relevant), h);
  return fmt::format("{:016x}", h);
}

bool ResultRow::same_outcome(const ResultRow& o) const {
  return regime == o.regime && mode == o.mode && fraction == o.fraction && decode == o.decode && seed == o.seed &&
         pooled_wer == o.pooled_wer && subs == o.subs && dels == o.dels && ins == o.ins && n_ref == o.n_ref &&
         skipped_utts == o.skipped_utts && flagged == o.flagged && cell_id == o.cell_id && note == o.note;
}

void write_hypotheses(const fs::path& path, const std::vector<Hypothesis>& hyps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  for (const auto& h : hyps) {
    nlohmann::ordered_json j;
    j["id"] = h.id;
    j["ref"] = h.ref;
    j["hyp"] = h.hyp;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

std::vector<Hypothesis> read_hypotheses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::vector<Hypothesis> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("ref").get<std::string>(), j.at("hyp").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

// ---- results CSV ----------------------------------------------------------

namespace {

const char* kRowHeader =
    "regime,mode,fraction,decode,seed,pooled_wer,subs,dels,ins,n_ref,skipped_utts,wall_time_s,flagged,cell_id,note";

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
  std::istringstream in(s);
  T v{};
  in >> v;
  if (in.fail() || !in.eof()) throw Error(Errc::parse, "bad " + what + " value '" + s + "' in results table");
  return v;
}

}  // namespace

const char* rows_header() { return kRowHeader; }

std::string format_row(const ResultRow& r) {
  return fmt::format("{},{},{},{},{},{:.17g},{},{},{},{},{},{:.3f},{},{},{}", r.regime, r.mode, r.fraction, r.decode,
                     r.seed, r.pooled_wer, r.subs, r.dels, r.ins, r.n_ref, r.skipped_utts, r.wall_time_s,
                     r.flagged ? 1 : 0, r.cell_id, csv_quote(r.note));
}

void write_rows(const fs::path& path, const std::vector<ResultRow>& rows) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
    out << kRowHeader << '\n';
    for (const auto& r : rows) out << format_row(r) << '\n';
    if (!out) throw Error(Errc::io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<ResultRow> read_rows(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRowHeader) {
    throw Error(Errc::parse, path.string() + ": unexpected results header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 15) throw Error(Errc::parse, path.string() + ": wrong field count in '" + line + "'");
    ResultRow r;
    r.regime = f[0];
    r.mode = f[1];
    r.fraction = parse_number<double>(f[2], "fraction");
    r.decode = f[3];
    r.seed = parse_number<std::uint64_t>(f[4], "seed");
    r.pooled_wer = parse_number<double>(f[5], "pooled_wer");
    r.subs = parse_number<std::size_t>(f[6], "subs");
    r.dels = parse_number<std::size_t>(f[7], "dels");
    r.ins = parse_number<std::size_t>(f[8], "ins");
    r.n_ref = parse_number<std::size_t>(f[9], "n_ref");
    r.skipped_utts = parse_number<std::size_t>(f[10], "skipped_utts");
    r.wall_time_s = parse_number<double>(f[11], "wall_time_s");
    r.flagged = f[12] == "1";
    r.cell_id = f[13];
    r.note = f[14];
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---- data -----------------------------------------------------------------

namespace {

std::vector<Sample> synth_split(const synth::CorpusSpec& base, const std::string& prefix, int n) {
  synth::CorpusSpec spec = base;
  spec.id_prefix = prefix;
  spec.n_utts = n;
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto r = synth::generate_utterance(spec, i);
    out.push_back(Sample{r.features.utterance_id, std::move(r.features.frames), std::move(r.features.gold)});
  }
  return out;
}

std::vector<Sample> load_split(const fs::path& dir, int dim) {
  const fs::path manifest = dir / "manifest.jsonl";
  std::vector<Sample> out;
  for (const auto& row : read_manifest(manifest)) {
    Utterance u = to_utterance(row);
    out.push_back(Sample{row.id, synth::read_features(dir / row.audio_path, dim), u.tokens});
  }
  return out;
}

std::vector<TokenSeq> texts_of(const std::vector<Sample>& samples) {
  std::vector<TokenSeq> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.text);
  return out;
}

}  // namespace

Dataset build_dataset(const WorkbenchConfig& cfg) {
  Dataset ds;
  const auto& d = cfg.data;
  if (!d.dir.empty()) {
    const fs::path root(d.dir);
    ds.train = load_split(root / "train", d.voice.dim);
    ds.dev = fs::exists(root / "dev" / "manifest.jsonl") ? load_split(root / "dev", d.voice.dim) : std::vector<Sample>{};
    ds.test = load_split(root / "test", d.voice.dim);
    ds.clean_train = fs::exists(root / "clean" / "manifest.jsonl") ? load_split(root / "clean", d.voice.dim) : ds.train;
    if (ds.clean_train.size() != ds.train.size()) {
      throw Error(Errc::dimension_mismatch, "clean split must have one utterance per training utterance");
    }
    std::set<std::string> words;
    for (const auto& s : ds.train) words.insert(s.text.begin(), s.text.end());
    if (!d.vocab_file.empty()) {
      auto extra = synth::load_vocabulary(d.vocab_file);
      words.insert(extra.words.begin(), extra.words.end());
    }
    ds.vocab.assign(words.begin(), words.end());
  } else {
    synth::CorpusSpec spec;
    spec.vocab = d.vocab_file.empty() ? synth::make_pseudo_vocabulary(d.vocab_size, d.vocab_seed)
                                      : synth::load_vocabulary(d.vocab_file);
    spec.voice = synth::make_voice(d.voice_seed, d.voice);
    spec.seed = d.seed;
    spec.len_min = d.len_min;
    spec.len_max = d.len_max;
    ds.train = synth_split(spec, "train", d.train_utts);
    if (d.clean_voice_seed) {
      // Target-domain voice: clean subset, dev and test all use it.
      synth::CorpusSpec clean = spec;
      clean.voice = synth::make_voice(*d.clean_voice_seed, d.voice);
      ds.clean_train = synth_split(clean, "train", d.train_utts);
      ds.dev = synth_split(clean, "dev", d.dev_utts);
      ds.test = synth_split(clean, "test", d.test_utts);
    } else {
      ds.clean_train = ds.train;
      ds.dev = synth_split(spec, "dev", d.dev_utts);
      ds.test = synth_split(spec, "test", d.test_utts);
    }
    ds.vocab = spec.vocab.words;
  }
  if (ds.train.empty()) throw Error(Errc::empty_corpus, "training split is empty");
  if (ds.test.empty()) throw Error(Errc::empty_corpus, "test split is empty");
  ds.lm = decode::train_lm(texts_of(ds.train), cfg.lm.order, cfg.lm.k);
  return ds;
}

// ---- runner ---------------------------------------------------------------

Runner::Runner(WorkbenchConfig cfg, const Dataset& data, fs::path work_dir)
    : cfg_(std::move(cfg)), data_(data), work_dir_(std::move(work_dir)) {
  cfg_.validate();
}

void Runner::log(const std::string& msg) const {
  if (log_) log_(msg);
}

fs::path Runner::cell_dir(const CellSpec& spec) const { return work_dir_ / "cells" / cell_id(spec, cfg_); }

fs::path Runner::checkpoint_path(const CellSpec& spec) const { return cell_dir(spec) / "model.wspm"; }

fs::path Runner::hypotheses_path(const CellSpec& spec, std::string_view decode) const {
  return cell_dir(spec) / fmt::format("hyps_{}.jsonl", decode);
}

std::vector<std::size_t> Runner::clean_subset(std::uint64_t seed) const {
  std::vector<std::size_t> order(data_.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = keyed_stream(seed, "clean-subset");
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(order.size(), static_cast<std::size_t>(cfg_.experiment.clean_subset_size)));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> Runner::self_training_pool(std::uint64_t seed) const {
  const auto subset = clean_subset(seed);
  const std::set<std::size_t> taken(subset.begin(), subset.end());
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < data_.train.size(); ++i) {
    if (!taken.count(i)) rest.push_back(i);
  }
  Rng rng = keyed_stream(seed, "self-training-pool");
  std::shuffle(rest.begin(), rest.end(), rng);
  const auto n = static_cast<std::size_t>(std::llround(cfg_.experiment.self_training_pool * static_cast<double>(rest.size())));
  rest.resize(std::min(n, rest.size()));
  std::sort(rest.begin(), rest.end());
  return rest;
}

acoustic::TrainResult Runner::fit(const acoustic::AcousticModel& init, const std::vector<Sample>& corpus,
                                  const acoustic::TrainConfig& tc, const std::string& label) {
  return acoustic::train(init, corpus, data_.dev, tc, [&](const acoustic::HistoryRow& h) {
    log(fmt::format("  {} epoch {} loss {:.3f} dev_wer {} skipped {}", label, h.epoch, h.train_loss,
                    h.dev_wer ? fmt::format("{:.4f}", *h.dev_wer) : std::string("-"), h.skipped));
  });
}

namespace {

std::size_t last_skipped(const acoustic::TrainResult& r) { return r.history.empty() ? 0 : r.history.back().skipped; }

std::vector<Sample> pick(const std::vector<Sample>& from, const std::vector<std::size_t>& idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(from[i]);
  return out;
}

}  // namespace

Runner::Trained Runner::train_weak(const CellSpec& spec) {
  Corpus gold;
  gold.reserve(data_.train.size());
  for (const auto& s : data_.train) gold.push_back(Utterance{s.id, s.text, 0.0, 0.0});
  corruptor::CorruptionConfig cc = cfg_.corruption;
  cc.mode = spec.mode;
  cc.seed = spec.seed;
  const corruptor::NeighborIndex index(data_.vocab);
  const auto weak = corruptor::corrupt_corpus(gold, cc, spec.fraction, spec.seed, index);
  std::vector<Sample> corpus = data_.train;
  for (std::size_t i = 0; i < corpus.size(); ++i) corpus[i].text = weak.utterances[i].tokens;

  acoustic::TrainConfig tc = cfg_.pretrain;
  tc.seed = spec.seed;
  auto res = fit(acoustic::AcousticModel::init(cfg_.model, spec.seed), corpus, tc, cell_key(spec));
  return {std::move(res.model), last_skipped(res)};
}

acoustic::AcousticModel Runner::upstream_model(const CellSpec& upstream) {
  const fs::path ckpt = checkpoint_path(upstream);
  if (!fs::exists(ckpt)) {
    if (!auto_dependencies_) {
      throw Error(Errc::missing_checkpoint, "no checkpoint for " + cell_key(upstream) + " at " + ckpt.string());
    }
    run(upstream);
  }
  return acoustic::load_checkpoint(ckpt);
}

Runner::Trained Runner::train_wsp_ft(const CellSpec& spec) {
  CellSpec up = spec;
  up.regime = Regime::weak_only;
  acoustic::AcousticModel pretrained = upstream_model(up);
  const auto subset = clean_subset(spec.seed);
  if (subset.empty()) return {std::move(pretrained), 0};
  acoustic::TrainConfig tc = cfg_.finetune;
  tc.seed = spec.seed;
  auto res = fit(pretrained, pick(data_.clean_train, subset), tc, cell_key(spec));
  return {std::move(res.model), last_skipped(res)};
}

Runner::Trained Runner::train_direct(const CellSpec& spec) {
  const auto subset = clean_subset(spec.seed);
  if (subset.empty()) throw Error(Errc::empty_corpus, "direct fine-tuning needs a nonempty clean subset");
  acoustic::TrainConfig tc = cfg_.pretrain;
  tc.seed = spec.seed;
  auto res = fit(acoustic::AcousticModel::init(cfg_.model, spec.seed), pick(data_.clean_train, subset), tc,
                 cell_key(spec));
  return {std::move(res.model), last_skipped(res)};
}

Runner::Trained Runner::train_student(const CellSpec& spec) {
  CellSpec teacher_spec{cfg_.experiment.teacher, cfg_.experiment.teacher_mode, cfg_.experiment.teacher_fraction,
                        spec.seed};
  const acoustic::AcousticModel teacher = upstream_model(teacher_spec);

  std::vector<Sample> merged = pick(data_.clean_train, clean_subset(spec.seed));
  std::size_t empty_labels = 0;
  for (std::size_t i : self_training_pool(spec.seed)) {
    Sample s = data_.train[i];
    const auto lp = acoustic::forward(teacher, s.frames);
    s.text = cfg_.experiment.pseudo_label_with_lm ? decode::beam_decode(lp, &data_.lm, cfg_.decoder)
                                                  : decode::greedy_decode(lp);
    if (s.text.empty()) ++empty_labels;
    merged.push_back(std::move(s));
  }
  if (merged.empty()) throw Error(Errc::empty_corpus, "self-training has neither clean nor pseudo-labelled data");
  log(fmt::format("  {} pseudo-labelled {} utterances ({} empty)", cell_key(spec),
                  merged.size() - clean_subset(spec.seed).size(), empty_labels));

  acoustic::TrainConfig tc = cfg_.pretrain;
  tc.seed = spec.seed;
  auto res = fit(acoustic::AcousticModel::init(cfg_.model, spec.seed), merged, tc, cell_key(spec));
  return {std::move(res.model), last_skipped(res)};
}

std::vector<ResultRow> Runner::evaluate(const CellSpec& spec, const acoustic::AcousticModel& model,
                                        std::size_t skipped, double wall_time_s) {
  const CellSpec c = spec.canonical();
  const std::string id = cell_id(spec, cfg_);
  std::vector<std::string> decodes;
  if (cfg_.experiment.decode != DecodeMode::lm) decodes.emplace_back("greedy");
  if (cfg_.experiment.decode != DecodeMode::greedy) decodes.emplace_back("lm");

  std::vector<ResultRow> rows;
  for (const auto& dec : decodes) {
    std::vector<Hypothesis> hyps;
    std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
    for (const auto& s : data_.test) {
      const auto lp = acoustic::forward(model, s.frames);
      TokenSeq hyp = dec == "lm" ? decode::beam_decode(lp, &data_.lm, cfg_.decoder) : decode::greedy_decode(lp);
      hyps.push_back({s.id, textkit::join(s.text), textkit::join(hyp)});
      pairs.emplace_back(s.text, std::move(hyp));
    }
    write_hypotheses(hypotheses_path(spec, dec), hyps);
    const auto rep = textkit::corpus_wer(pairs);
    ResultRow r;
    r.regime = to_string(c.regime);
    r.mode = corruptor::to_string(c.mode);
    r.fraction = c.fraction;
    r.decode = dec;
    r.seed = c.seed;
    r.pooled_wer = rep.wer();
    r.subs = rep.subs;
    r.dels = rep.dels;
    r.ins = rep.ins;
    r.n_ref = rep.n_ref;
    r.skipped_utts = skipped;
    r.wall_time_s = wall_time_s;
    r.flagged = rep.wer() >= cfg_.experiment.nonconverged_wer;
    if (r.flagged) r.note = "not converged";
    r.cell_id = id;
    rows.push_back(std::move(r));
  }
  return rows;
}

CellOutcome Runner::run(const CellSpec& raw) {
  const CellSpec spec = raw.canonical();
  CellOutcome out{spec, cell_id(spec, cfg_), {}, false};
  const fs::path dir = cell_dir(spec);
  const fs::path rows_path = dir / "rows.csv";
  if (fs::exists(rows_path) && fs::exists(checkpoint_path(spec))) {
    out.rows = read_rows(rows_path);
    out.cached = true;
    return out;
  }
  fs::create_directories(dir);
  log(fmt::format("cell {} ({})", cell_key(spec), out.id));
  const auto t0 = std::chrono::steady_clock::now();
  Trained trained;
  switch (spec.regime) {
    case Regime::weak_only: trained = train_weak(spec); break;
    case Regime::wsp_ft: trained = train_wsp_ft(spec); break;
    case Regime::direct_ft: trained = train_direct(spec); break;
    case Regime::self_training: trained = train_student(spec); break;
  }
  // Evaluate exactly what downstream cells will load.
  trained.model = acoustic::round_to_float(trained.model);
  acoustic::save_checkpoint(checkpoint_path(spec), trained.model);
  {
    std::ofstream key(dir / "spec.txt");
    key << cell_key(spec) << '\n';
  }
  const double train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.rows = evaluate(spec, trained.model, trained.skipped, 0.0);
  const double total_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (auto& r : out.rows) r.wall_time_s = total_s;
  write_rows(rows_path, out.rows);
  log(fmt::format("  done in {:.1f}s (train {:.1f}s): {}", total_s, train_s, [&] {
    std::string s;
    for (const auto& r : out.rows) s += fmt::format("{}={:.4f} ", r.decode, r.pooled_wer);
    return s;
  }()));
  return out;
}

CellOutcome Runner::run_weak_only(corruptor::Mode mode, double fraction, std::uint64_t seed) {
  return run(CellSpec{Regime::weak_only, mode, fraction, seed});
}

CellOutcome Runner::run_wsp_ft(corruptor::Mode mode, double fraction, std::uint64_t seed) {
  return run(CellSpec{Regime::wsp_ft, mode, fraction, seed});
}

CellOutcome Runner::run_direct_ft(std::uint64_t seed) {
  return run(CellSpec{Regime::direct_ft, corruptor::Mode::random, 0.0, seed});
}

CellOutcome Runner::run_self_training(std::uint64_t seed) {
  return run(CellSpec{Regime::self_training, corruptor::Mode::random, 0.0, seed});
}

}  // namespace wsp::harness
