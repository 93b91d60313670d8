// tools/wsp.cpp
//
// Command-line front end. Exit status: 0 success, 1 usage error, 2 data
// error, 3 sweep completed with flagged rows.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wsp/checkpoint.hpp"
#include "wsp/config.hpp"
#include "wsp/corruptor.hpp"
#include "wsp/decode.hpp"
#include "wsp/error.hpp"
#include "wsp/experiment.hpp"
#include "wsp/feature_io.hpp"
#include "wsp/manifest.hpp"
#include "wsp/report.hpp"
#include "wsp/sweep.hpp"
#include "wsp/synth.hpp"
#include "wsp/textkit.hpp"
#include "wsp/trainer.hpp"

namespace fs = std::filesystem;
using namespace wsp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* app, Common& c, bool out_required) {
  app->add_option("-c,--config", c.config, "YAML config file (defaults apply when omitted)");
  app->add_option("--seed", c.seed, "Seed override");
  auto* out = app->add_option("-o,--out-dir", c.out_dir, "Output directory");
  if (out_required) out->required();
}

WorkbenchConfig config_of(const Common& c) { return c.config.empty() ? parse_config("{}") : load_config(c.config); }

void log_line(const std::string& s) { std::cerr << s << std::endl; }

std::vector<acoustic::Sample> load_samples(const fs::path& manifest, int dim) {
  std::vector<acoustic::Sample> out;
  const fs::path base = manifest.parent_path();
  for (const auto& row : read_manifest(manifest)) {
    out.push_back({row.id, synth::read_features(base / row.audio_path, dim), to_utterance(row).tokens});
  }
  return out;
}

// ---- synth ----

int cmd_synth(const Common& c) {
  WorkbenchConfig cfg = config_of(c);
  if (c.seed) cfg.data.seed = *c.seed;
  const fs::path out(c.out_dir);
  synth::CorpusSpec spec;
  spec.vocab = cfg.data.vocab_file.empty() ? synth::make_pseudo_vocabulary(cfg.data.vocab_size, cfg.data.vocab_seed)
                                           : synth::load_vocabulary(cfg.data.vocab_file);
  spec.voice = synth::make_voice(cfg.data.voice_seed, cfg.data.voice);
  spec.seed = cfg.data.seed;
  spec.len_min = cfg.data.len_min;
  spec.len_max = cfg.data.len_max;
  synth::CorpusSpec target = spec;
  if (cfg.data.clean_voice_seed) target.voice = synth::make_voice(*cfg.data.clean_voice_seed, cfg.data.voice);

  auto split = [&](synth::CorpusSpec s, const std::string& name, const std::string& prefix, int n) {
    if (n < 1) return std::vector<ManifestRow>{};
    s.id_prefix = prefix;
    s.n_utts = n;
    auto rows = synth::generate_corpus(s, out / name);
    fmt::print("{}: {} utterances\n", (out / name).string(), rows.size());
    return rows;
  };
  const auto train_rows = split(spec, "train", "train", cfg.data.train_utts);
  if (cfg.data.clean_voice_seed) split(target, "clean", "train", cfg.data.train_utts);
  split(target, "dev", "dev", cfg.data.dev_utts);
  split(target, "test", "test", cfg.data.test_utts);

  {
    std::ofstream v(out / "vocab.txt");
    for (const auto& w : spec.vocab.words) v << w << '\n';
  }
  std::vector<TokenSeq> texts;
  for (const auto& r : train_rows) texts.push_back(to_utterance(r).tokens);
  decode::train_lm(texts, cfg.lm.order, cfg.lm.k).save(out / "lm.txt");
  fmt::print("{}: vocabulary, {}: character LM\n", (out / "vocab.txt").string(), (out / "lm.txt").string());
  return 0;
}

// ---- corrupt ----

struct CorruptArgs {
  std::string manifest;
  std::string mode;
  double fraction = 1.0;
  std::string vocab;
};

int cmd_corrupt(const Common& c, const CorruptArgs& a) {
  WorkbenchConfig cfg = config_of(c);
  corruptor::CorruptionConfig cc = cfg.corruption;
  if (!a.mode.empty()) cc.mode = corruptor::parse_mode(a.mode);
  const std::uint64_t seed = c.seed.value_or(0);
  cc.seed = seed;

  const fs::path in(a.manifest);
  const auto rows = read_manifest(in);
  const Corpus gold = to_corpus(rows);
  std::vector<std::string> vocab;
  if (!a.vocab.empty()) {
    vocab = synth::load_vocabulary(a.vocab).words;
  } else {
    std::set<std::string> words;
    for (const auto& u : gold) words.insert(u.tokens.begin(), u.tokens.end());
    vocab.assign(words.begin(), words.end());
  }
  const corruptor::NeighborIndex index(vocab);
  const auto weak = corruptor::corrupt_corpus(gold, cc, a.fraction, seed, index);

  const fs::path out_dir(c.out_dir);
  fs::create_directories(out_dir);
  auto out_rows = with_texts(rows, weak.utterances);
  for (auto& r : out_rows) {
    r.audio_path = fs::relative(fs::absolute(in.parent_path() / r.audio_path), fs::absolute(out_dir)).generic_string();
  }
  write_manifest(out_dir / "manifest.jsonl", out_rows);

  std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].tokens.empty()) continue;
    pairs.emplace_back(gold[i].tokens, weak.utterances[i].tokens);
    if (gold[i].tokens != weak.utterances[i].tokens) ++changed;
  }
  const auto rep = textkit::corpus_wer(pairs);
  fmt::print("{}: {} of {} utterances changed, transcript WER {} (S={} D={} I={})\n",
             (out_dir / "manifest.jsonl").string(), changed, gold.size(), harness::format_percent(rep.wer()), rep.subs,
             rep.dels, rep.ins);
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string train;
  std::string dev;
  std::string init;
  bool finetune = false;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  WorkbenchConfig cfg = config_of(c);
  acoustic::TrainConfig tc = a.finetune ? cfg.finetune : cfg.pretrain;
  tc.seed = c.seed.value_or(0);
  const auto train = load_samples(a.train, cfg.model.dim);
  const auto dev = a.dev.empty() ? std::vector<acoustic::Sample>{} : load_samples(a.dev, cfg.model.dim);
  const acoustic::AcousticModel init =
      a.init.empty() ? acoustic::AcousticModel::init(cfg.model, tc.seed) : acoustic::load_checkpoint(a.init);
  const fs::path out(c.out_dir);
  fs::create_directories(out);
  std::ofstream hist(out / "history.csv");
  hist << "epoch,step,train_loss,dev_wer,skipped\n";
  auto res = acoustic::train(init, train, dev, tc, [&](const acoustic::HistoryRow& h) {
    const std::string dw = h.dev_wer ? fmt::format("{:.6f}", *h.dev_wer) : "";
    hist << fmt::format("{},{},{:.6f},{},{}\n", h.epoch, h.step, h.train_loss, dw, h.skipped) << std::flush;
    log_line(fmt::format("epoch {} loss {:.4f} dev_wer {} skipped {}", h.epoch, h.train_loss, dw.empty() ? "-" : dw,
                         h.skipped));
  });
  acoustic::save_checkpoint(out / "model.wspm", res.model);
  fmt::print("{}: best epoch {}{}\n", (out / "model.wspm").string(), res.best_epoch,
             res.best_dev_wer ? fmt::format(", dev WER {}", harness::format_percent(*res.best_dev_wer)) : "");
  return 0;
}

// ---- decode ----

struct DecodeArgs {
  std::string model;
  std::string manifest;
  std::string lm;
  std::string decode = "both";
};

int cmd_decode(const Common& c, const DecodeArgs& a) {
  WorkbenchConfig cfg = config_of(c);
  const DecodeMode mode = parse_decode_mode(a.decode);
  if (mode != DecodeMode::greedy && a.lm.empty()) throw Error(Errc::usage, "LM decoding needs --lm");
  const auto model = acoustic::load_checkpoint(a.model);
  const auto samples = load_samples(a.manifest, model.shape.dim);
  std::optional<decode::NgramLM> lm;
  if (!a.lm.empty()) lm = decode::NgramLM::load(a.lm);
  const fs::path out(c.out_dir);
  fs::create_directories(out);
  for (const char* dec : {"greedy", "lm"}) {
    if ((mode == DecodeMode::greedy && std::string(dec) == "lm") || (mode == DecodeMode::lm && std::string(dec) == "greedy")) {
      continue;
    }
    std::vector<harness::Hypothesis> hyps;
    std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
    for (const auto& s : samples) {
      const auto lp = acoustic::forward(model, s.frames);
      TokenSeq hyp = std::string(dec) == "lm" ? decode::beam_decode(lp, &*lm, cfg.decoder) : decode::greedy_decode(lp);
      hyps.push_back({s.id, textkit::join(s.text), textkit::join(hyp)});
      if (!s.text.empty()) pairs.emplace_back(s.text, hyp);
    }
    const fs::path path = out / fmt::format("hyps_{}.jsonl", dec);
    harness::write_hypotheses(path, hyps);
    if (!pairs.empty()) {
      const auto rep = textkit::corpus_wer(pairs);
      fmt::print("{}: WER {} (S={} D={} I={} N={})\n", path.string(), harness::format_percent(rep.wer()), rep.subs,
                 rep.dels, rep.ins, rep.n_ref);
    } else {
      fmt::print("{}\n", path.string());
    }
  }
  return 0;
}

// ---- score ----

struct ScoreArgs {
  std::string hyps;
  std::string ref;
  std::string hyp;
  std::size_t samples = 0;
};

int cmd_score(const ScoreArgs& a) {
  std::vector<std::pair<TokenSeq, TokenSeq>> pairs;
  if (!a.hyps.empty()) {
    for (const auto& h : harness::read_hypotheses(a.hyps)) {
      pairs.emplace_back(textkit::normalize(h.ref), textkit::normalize(h.hyp));
    }
  } else if (!a.ref.empty() && !a.hyp.empty()) {
    const auto refs = read_manifest(a.ref);
    const auto hyps = read_manifest(a.hyp);
    if (refs.size() != hyps.size()) throw Error(Errc::dimension_mismatch, "reference and hypothesis sizes differ");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      if (refs[i].id != hyps[i].id) throw Error(Errc::parse, "utterance id mismatch: " + refs[i].id + " vs " + hyps[i].id);
      pairs.emplace_back(to_utterance(refs[i]).tokens, to_utterance(hyps[i]).tokens);
    }
  } else {
    throw Error(Errc::usage, "score needs --hyps, or --ref with --hyp");
  }
  std::vector<std::pair<TokenSeq, TokenSeq>> scored;
  for (auto& p : pairs) {
    if (!p.first.empty()) scored.push_back(p);
  }
  const auto rep = textkit::corpus_wer(scored);
  fmt::print("utterances {} words {} subs {} dels {} ins {} WER {}\n", scored.size(), rep.n_ref, rep.subs, rep.dels,
             rep.ins, harness::format_percent(rep.wer()));
  std::size_t shown = 0;
  for (const auto& [ref, hyp] : scored) {
    if (shown == a.samples) break;
    if (ref == hyp) continue;
    fmt::print("\n{}", harness::render_diff(ref, hyp));
    ++shown;
  }
  return 0;
}

// ---- sweep / report ----

int cmd_sweep(const Common& c, bool quiet) {
  WorkbenchConfig cfg = config_of(c);
  if (c.seed) cfg.sweep.seeds = {*c.seed};
  const fs::path out(c.out_dir);
  fs::create_directories(out);
  {
    std::ofstream saved(out / "config.yaml");
    saved << dump_config(cfg);
  }
  const auto data = harness::build_dataset(cfg);
  harness::Runner runner(cfg, data, out);
  if (!quiet) runner.set_logger(log_line);
  const auto res = harness::run_sweep(runner, cfg.sweep, out / "results.csv");
  fmt::print("{}: {} rows ({} cells trained, {} cached, {} failed)\n", (out / "results.csv").string(), res.rows.size(),
             res.executed, res.cached, res.failed);
  if (res.any_flagged()) {
    fmt::print("flagged rows present\n");
    return 3;
  }
  return 0;
}

int cmd_report(const Common& c, const std::string& results_dir, std::size_t samples) {
  const fs::path dir(results_dir);
  const auto rows = harness::rescore_from_hypotheses(harness::read_rows(dir / "results.csv"), dir);
  const std::string doc = harness::render_report(rows, harness::pick_samples(rows, dir, samples));
  const fs::path out = c.out_dir.empty() ? dir / "report.md" : fs::path(c.out_dir) / "report.md";
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out);
  if (!f) throw Error(Errc::io, "cannot write " + out.string());
  f << doc;
  fmt::print("{}\n", out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised pretraining workbench"};
  app.require_subcommand(1);

  Common synth_c, corrupt_c, train_c, decode_c, score_c, sweep_c, report_c;
  auto* synth = app.add_subcommand("synth", "Generate synthetic train/dev/test corpora, vocabulary and LM");
  add_common(synth, synth_c, true);

  CorruptArgs corrupt_a;
  auto* corrupt = app.add_subcommand("corrupt", "Corrupt the transcripts of a manifest");
  add_common(corrupt, corrupt_c, true);
  corrupt->add_option("-m,--manifest", corrupt_a.manifest, "Input manifest")->required();
  corrupt->add_option("--mode", corrupt_a.mode, "random or full (default from config)");
  corrupt->add_option("--fraction", corrupt_a.fraction, "Share of utterances to corrupt")->check(CLI::Range(0.0, 1.0));
  corrupt->add_option("--vocab", corrupt_a.vocab, "Neighbor vocabulary, one word per line");

  TrainArgs train_a;
  auto* train = app.add_subcommand("train", "Train or fine-tune an acoustic model");
  add_common(train, train_c, true);
  train->add_option("--train", train_a.train, "Training manifest")->required();
  train->add_option("--dev", train_a.dev, "Dev manifest for early stopping");
  train->add_option("--init", train_a.init, "Checkpoint to start from");
  train->add_flag("--finetune", train_a.finetune, "Use the fine-tuning hyperparameters");

  DecodeArgs decode_a;
  auto* dec = app.add_subcommand("decode", "Decode a manifest with a trained model");
  add_common(dec, decode_c, true);
  dec->add_option("--model", decode_a.model, "Checkpoint")->required();
  dec->add_option("-m,--manifest", decode_a.manifest, "Manifest to decode")->required();
  dec->add_option("--lm", decode_a.lm, "Character LM file");
  dec->add_option("--decode", decode_a.decode, "greedy, lm or both");

  ScoreArgs score_a;
  auto* score = app.add_subcommand("score", "Pooled WER of hypotheses against references");
  add_common(score, score_c, false);
  score->add_option("--hyps", score_a.hyps, "Hypotheses file (id, ref, hyp per line)");
  score->add_option("--ref", score_a.ref, "Reference manifest");
  score->add_option("--hyp", score_a.hyp, "Hypothesis manifest");
  score->add_option("--samples", score_a.samples, "Aligned diffs to print");

  bool quiet = false;
  auto* sweep = app.add_subcommand("sweep", "Run the experiment grid (resumable)");
  add_common(sweep, sweep_c, true);
  sweep->add_flag("-q,--quiet", quiet, "No per-epoch progress");

  std::string results_dir;
  std::size_t samples = 3;
  auto* report = app.add_subcommand("report", "Markdown report from a sweep directory");
  add_common(report, report_c, false);
  report->add_option("--results", results_dir, "Sweep output directory")->required();
  report->add_option("--samples", samples, "Aligned diffs per regime");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(synth_c);
    if (*corrupt) return cmd_corrupt(corrupt_c, corrupt_a);
    if (*train) return cmd_train(train_c, train_a);
    if (*dec) return cmd_decode(decode_c, decode_a);
    if (*score) return cmd_score(score_a);
    if (*sweep) return cmd_sweep(sweep_c, quiet);
    if (*report) return cmd_report(report_c, results_dir, samples);
  } catch (const Error& e) {
    std::cerr << "wsp: " << e.what() << std::endl;
    return e.code() == Errc::usage ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "wsp: " << e.what() << std::endl;
    return 2;
  }
  return 1;
}
