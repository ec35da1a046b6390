// SPDX-License-Identifier: Apache-2.0
#include "charnmt/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "charnmt/beam.hpp"
#include "charnmt/bleu.hpp"
#include "charnmt/bpe.hpp"
#include "charnmt/checkpoint.hpp"
#include "charnmt/config.hpp"
#include "charnmt/corpus.hpp"
#include "charnmt/error.hpp"
#include "charnmt/gradcheck.hpp"
#include "charnmt/model.hpp"
#include "charnmt/toygen.hpp"
#include "charnmt/train.hpp"
#include "charnmt/translit.hpp"
#include "charnmt/utf8.hpp"
#include "charnmt/vocab.hpp"

namespace charnmt {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> read_lines(std::istream& is) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> read_lines_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open file: " + path);
  return read_lines(is);
}

void write_lines_file(const std::string& path,
                      const std::vector<std::string>& lines) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write file: " + path);
  for (const auto& l : lines) os << l << '\n';
  if (!os) throw DataError("failed writing file: " + path);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string preset;
  std::string config_path;
  std::vector<std::string> corpus_paths;  // flattened SRC TGT pairs
  std::vector<std::string> val_paths;     // SRC REF
  std::string out_dir;
  TrainConfig tc;
};

// Encodes one source line for the configured source unit, ending with
// the end-of-sentence symbol the decoder stops on.
std::vector<int> encode_source(const ModelConfig& cfg, const Vocabulary& vocab,
                               const std::string& line) {
  std::vector<int> ids = cfg.source_kind == SourceKind::kChar
                             ? vocab.encode_chars(line)
                             : vocab.encode_tokens(split_ws(line));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<int> encode_target(const Vocabulary& vocab,
                               const std::string& line) {
  std::vector<int> ids;
  ids.push_back(Vocabulary::kBos);
  for (int id : vocab.encode_chars(line)) ids.push_back(id);
  ids.push_back(Vocabulary::kEos);
  return ids;
}

int do_train(const TrainArgs& a, std::ostream& out) {
  if (a.preset.empty() == a.config_path.empty())
    throw DataError("exactly one of --preset or --config is required");
  ModelConfig cfg = a.preset.empty() ? ModelConfig::load_file(a.config_path)
                                     : preset_config(a.preset);
  cfg.validate();
  a.tc.validate();

  // Load and length-filter every corpus before creating any output.
  std::vector<ParallelCorpus> corpora;
  for (std::size_t i = 0; i + 1 < a.corpus_paths.size(); i += 2) {
    ParallelCorpus c = load_parallel(a.corpus_paths[i], a.corpus_paths[i + 1],
                                     a.corpus_paths[i]);
    if (cfg.source_kind == SourceKind::kChar) {
      c = filter_pairs_by_chars(c, cfg.max_source_length);
    } else {
      std::vector<std::vector<std::string>> tokens;
      tokens.reserve(c.size());
      for (const auto& s : c.source) tokens.push_back(split_ws(s));
      c = filter_pairs_by_tokens(c, tokens, cfg.max_source_length, nullptr);
    }
    if (c.size() == 0)
      throw DataError("corpus " + c.tag + " is empty after length filtering");
    corpora.push_back(std::move(c));
  }
  if (corpora.empty()) throw DataError("at least one --corpus pair is required");

  std::vector<std::string> src_lines, tgt_lines;
  for (const auto& c : corpora) {
    src_lines.insert(src_lines.end(), c.source.begin(), c.source.end());
    tgt_lines.insert(tgt_lines.end(), c.target.begin(), c.target.end());
  }
  const Vocabulary src_vocab =
      cfg.source_kind == SourceKind::kChar
          ? Vocabulary::build_chars(src_lines, cfg.source_vocab_size)
          : Vocabulary::build_tokens(src_lines, cfg.source_vocab_size);
  const Vocabulary tgt_vocab =
      Vocabulary::build_chars(tgt_lines, cfg.target_vocab_size);
  // The configured sizes are caps; the model is built at the size the
  // data actually produced, so no embedding column is unreachable.
  cfg.source_vocab_size = src_vocab.size();
  cfg.target_vocab_size = tgt_vocab.size();

  std::vector<PreparedCorpus> prepared;
  std::vector<std::size_t> sizes;
  for (const auto& c : corpora) {
    PreparedCorpus p;
    p.tag = c.tag;
    for (std::size_t i = 0; i < c.size(); ++i) {
      p.src.push_back(encode_source(cfg, src_vocab, c.source[i]));
      p.tgt.push_back(encode_target(tgt_vocab, c.target[i]));
    }
    sizes.push_back(p.size());
    prepared.push_back(std::move(p));
  }
  const ScheduleSpec schedule =
      proportional_quotas(sizes, a.tc.minibatch_size);

  ValSet val;
  const bool has_val = !a.val_paths.empty();
  if (has_val) {
    ParallelCorpus v = load_parallel(a.val_paths[0], a.val_paths[1], "val");
    for (std::size_t i = 0; i < v.size(); ++i) {
      val.src.push_back(encode_source(cfg, src_vocab, v.source[i]));
      val.refs.push_back(v.target[i]);
    }
  }

  // Inputs are all readable; now it is safe to create outputs.
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  cfg.save_file((dir / "config.txt").string());
  src_vocab.save_file((dir / "src_vocab.txt").string());
  tgt_vocab.save_file((dir / "tgt_vocab.txt").string());
  std::ofstream metrics(dir / "metrics.log", std::ios::binary);
  if (!metrics) throw DataError("cannot write metrics log in " + a.out_dir);

  Model<float> model(cfg);
  init_parameters(model.params(), a.tc.init_range, a.tc.seed);

  TrainSinks sinks;
  sinks.checkpoint_path = (dir / "checkpoint.bin").string();
  sinks.val_decode_path = has_val ? (dir / "val_decode.txt").string() : "";
  sinks.metrics = &metrics;
  const TrainResult r =
      train_loop(model, src_vocab, tgt_vocab, prepared, schedule,
                 has_val ? &val : nullptr, a.tc, sinks);

  out << "finished at update " << r.updates;
  if (has_val)
    out << " best_bleu " << std::fixed << std::setprecision(2) << r.best_bleu;
  out << "\ncheckpoint " << sinks.checkpoint_path << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// translate

struct TranslateArgs {
  std::string checkpoint;
  std::string in_path;
  std::string out_path;
  DecodeOptions opts;
};

int do_translate(const TranslateArgs& a, std::istream& in, std::ostream& out) {
  LoadedModel<float> loaded = load_checkpoint_file<float>(a.checkpoint);
  const std::vector<std::string> lines =
      a.in_path.empty() ? read_lines(in) : read_lines_file(a.in_path);

  std::vector<std::vector<int>> sources;
  sources.reserve(lines.size());
  for (const auto& line : lines)
    sources.push_back(
        encode_source(loaded.model.config(), loaded.src_vocab, line));

  const std::vector<DecodeResult> results =
      translate_batch(loaded.model, sources, a.opts);
  std::vector<std::string> decoded;
  decoded.reserve(results.size());
  for (const auto& r : results)
    decoded.push_back(loaded.tgt_vocab.decode_to_text(r.symbols));

  if (a.out_path.empty()) {
    for (const auto& d : decoded) out << d << '\n';
  } else {
    write_lines_file(a.out_path, decoded);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bpe

struct BpeLearnArgs {
  std::vector<std::string> corpus_paths;
  std::string merges_path;
  std::size_t ops = kDefaultBpeOps;
  bool ops_given = false;
  bool multilingual = false;
};

int do_bpe_learn(const BpeLearnArgs& a, std::ostream& out) {
  std::vector<std::string> lines;
  if (a.multilingual) {
    if (a.corpus_paths.size() < 2)
      throw DataError("--multilingual needs at least two corpora");
    std::vector<std::vector<std::string>> per_corpus;
    per_corpus.reserve(a.corpus_paths.size());
    for (const auto& p : a.corpus_paths) per_corpus.push_back(read_lines_file(p));
    lines = trim_for_multilingual_bpe(per_corpus);
  } else {
    for (const auto& p : a.corpus_paths) {
      std::vector<std::string> l = read_lines_file(p);
      lines.insert(lines.end(), l.begin(), l.end());
    }
  }
  const std::size_t ops =
      a.ops_given ? a.ops
                  : (a.multilingual ? kMultilingualBpeOps : kDefaultBpeOps);
  const MergeTable table = learn_bpe(lines, ops);
  table.save_file(a.merges_path);
  out << "learned " << table.size() << " merges\n";
  return 0;
}

struct BpeApplyArgs {
  std::string merges_path;
  std::string in_path;
  std::string out_path;
};

int do_bpe_apply(const BpeApplyArgs& a, std::istream& in, std::ostream& out) {
  const MergeTable table = MergeTable::load_file(a.merges_path);
  const std::vector<std::string> lines =
      a.in_path.empty() ? read_lines(in) : read_lines_file(a.in_path);
  std::vector<std::string> rewritten;
  rewritten.reserve(lines.size());
  for (const auto& line : lines) {
    const std::vector<std::string> pieces = apply_bpe(line, table);
    std::string joined;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (i) joined += ' ';
      joined += pieces[i];
    }
    rewritten.push_back(std::move(joined));
  }
  if (a.out_path.empty()) {
    for (const auto& l : rewritten) out << l << '\n';
  } else {
    write_lines_file(a.out_path, rewritten);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// small subcommands

int do_bleu(const std::string& hyp_path, const std::string& ref_path,
            bool smooth1, std::ostream& out) {
  const double score = corpus_bleu(read_lines_file(hyp_path),
                                   read_lines_file(ref_path), smooth1);
  out << std::fixed << std::setprecision(2) << score << '\n';
  return 0;
}

int do_translit(std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out << iso9_transliterate(line).text << '\n';
  }
  return 0;
}

struct ToygenArgs {
  ToySpec spec;
  std::string task = "copy";
  std::string out_prefix;
  std::string pair_tag;
};

int do_toygen(const ToygenArgs& a, std::ostream& out) {
  ToySpec spec = a.spec;
  spec.task = toy_task_from_string(a.task);
  const std::vector<ToyPair> pairs = generate_toy_pairs(spec);
  std::string prefix = a.out_prefix;
  if (!a.pair_tag.empty()) prefix += "." + a.pair_tag;
  std::vector<std::string> src, tgt;
  src.reserve(pairs.size());
  tgt.reserve(pairs.size());
  for (const auto& p : pairs) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
  write_lines_file(prefix + ".src", src);
  write_lines_file(prefix + ".tgt", tgt);
  out << "wrote " << pairs.size() << " pairs to " << prefix << ".{src,tgt}\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::uint64_t seed = 7;
  double h = 1e-4;
  double tolerance = 1e-3;
  double rel_floor = 1e-4;
  bool inject_fault = false;
};

int do_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  Vocabulary vocab;
  for (char c = 'a'; c <= 'h'; ++c) vocab.add(std::string(1, c));

  ModelConfig cfg = preset_config("tiny");
  Model<double> model(cfg);
  // A wider init than training keeps convolution outputs well apart,
  // so the pooling argmax cannot flip inside the +-h sweep.
  init_parameters(model.params(), 0.2, a.seed);

  TrainBatch batch;
  for (const char* word : {"abcdefg", "hgfe"}) {
    batch.src.push_back(encode_source(cfg, vocab, word));
    batch.tgt.push_back(encode_target(vocab, word));
  }

  std::function<void(ParamSet<double>&)> fault;
  if (a.inject_fault) {
    fault = [](ParamSet<double>& params) {
      params.find("out_vocab_b")->grad()[0] += 1.0;
    };
  }
  const GradCheckReport report = check_gradients(
      model.params(), [&] { return model.teacher_loss(batch); }, a.h,
      a.tolerance, a.rel_floor, fault);

  out << std::scientific << std::setprecision(3);
  for (const auto& e : report.entries)
    out << e.name << " elements " << e.elements << " max_rel_error "
        << e.max_rel_error << '\n';
  const GradCheckEntry& worst = report.worst();
  out << "worst " << worst.name << " rel_error " << worst.max_rel_error
      << " analytic " << worst.analytic_at_worst << " numeric "
      << worst.numeric_at_worst << '\n';
  out << (report.ok() ? "gradient check passed" : "gradient check FAILED")
      << " (tolerance " << report.tolerance << ")\n";
  return report.ok() ? 0 : 1;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"character-level neural machine translation toolkit"};
  app.name("charnmt");
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model on parallel text");
  train_cmd->add_option("--preset", train_args.preset,
                        "named configuration: bilingual-char, "
                        "multilingual-char, bpe2char, tiny");
  train_cmd->add_option("--config", train_args.config_path,
                        "model configuration file");
  train_cmd
      ->add_option("--corpus", train_args.corpus_paths,
                   "source and target file pair (repeatable)")
      ->type_size(2)
      ->required();
  train_cmd
      ->add_option("--val", train_args.val_paths,
                   "validation source and reference files")
      ->type_size(2);
  train_cmd->add_option("--out", train_args.out_dir, "output directory")
      ->required();
  train_cmd->add_option("--lr", train_args.tc.learning_rate, "learning rate");
  train_cmd->add_option("--batch", train_args.tc.minibatch_size,
                        "minibatch size");
  train_cmd->add_option("--updates", train_args.tc.max_updates,
                        "update ceiling");
  train_cmd->add_option("--eval-every", train_args.tc.eval_every,
                        "updates between validation evaluations");
  train_cmd->add_option("--patience", train_args.tc.patience,
                        "non-improving evaluations before stopping");
  train_cmd->add_option("--clip", train_args.tc.clip_threshold,
                        "gradient norm threshold");
  train_cmd->add_option("--init-range", train_args.tc.init_range,
                        "uniform initialization half-width");
  train_cmd->add_option("--val-beam", train_args.tc.val_beam,
                        "beam width for validation decoding");
  train_cmd->add_option("--seed", train_args.tc.seed, "random seed");

  TranslateArgs tr_args;
  bool tr_no_length_norm = false;
  CLI::App* translate_cmd =
      app.add_subcommand("translate", "decode text with a trained model");
  translate_cmd->add_option("--checkpoint", tr_args.checkpoint, "model file")
      ->required();
  translate_cmd->add_option("--in", tr_args.in_path,
                            "input file (default: stdin)");
  translate_cmd->add_option("--out", tr_args.out_path,
                            "output file (default: stdout)");
  translate_cmd->add_option("--beam", tr_args.opts.width, "beam width");
  translate_cmd->add_option("--max-len", tr_args.opts.max_len,
                            "output length bound (0: 3*source+10)");
  translate_cmd->add_flag("--greedy", tr_args.opts.greedy,
                          "greedy decoding instead of beam search");
  translate_cmd->add_flag("--no-length-norm", tr_no_length_norm,
                          "rank hypotheses by total log-probability");

  CLI::App* bpe_cmd =
      app.add_subcommand("bpe", "learn or apply byte pair encodings");
  bpe_cmd->require_subcommand(1);
  BpeLearnArgs bl_args;
  CLI::App* bpe_learn_cmd =
      bpe_cmd->add_subcommand("learn", "learn a merge table from text");
  bpe_learn_cmd->add_option("corpus", bl_args.corpus_paths, "input text files")
      ->required();
  bpe_learn_cmd->add_option("--merges", bl_args.merges_path,
                            "merge table output path")
      ->required();
  CLI::Option* ops_opt = bpe_learn_cmd->add_option(
      "--ops", bl_args.ops, "merge operations (default 20000, 50000 with "
                            "--multilingual)");
  bpe_learn_cmd->add_flag("--multilingual", bl_args.multilingual,
                          "trim corpora to equal size before learning");
  BpeApplyArgs ba_args;
  CLI::App* bpe_apply_cmd =
      bpe_cmd->add_subcommand("apply", "segment text with a merge table");
  bpe_apply_cmd->add_option("--merges", ba_args.merges_path, "merge table")
      ->required();
  bpe_apply_cmd->add_option("--in", ba_args.in_path,
                            "input file (default: stdin)");
  bpe_apply_cmd->add_option("--out", ba_args.out_path,
                            "output file (default: stdout)");

  std::string bleu_hyp, bleu_ref;
  bool bleu_smooth1 = false;
  CLI::App* bleu_cmd =
      app.add_subcommand("bleu", "corpus BLEU of hypotheses against references");
  bleu_cmd->add_option("hypotheses", bleu_hyp, "hypothesis file")->required();
  bleu_cmd->add_option("references", bleu_ref, "reference file")->required();
  bleu_cmd->add_flag("--smooth1", bleu_smooth1,
                     "add-one smoothing for zero n-gram matches (n > 1)");

  CLI::App* translit_cmd = app.add_subcommand(
      "translit", "transliterate Cyrillic stdin to Latin stdout");

  ToygenArgs toy_args;
  CLI::App* toygen_cmd =
      app.add_subcommand("toygen", "generate a synthetic parallel corpus");
  toygen_cmd
      ->add_option("--task", toy_args.task, "copy, reverse, or caesar")
      ->required();
  toygen_cmd->add_option("--n", toy_args.spec.count, "number of pairs");
  toygen_cmd->add_option("--alphabet", toy_args.spec.alphabet,
                         "source symbols");
  toygen_cmd->add_option("--shift", toy_args.spec.shift,
                         "caesar rotation amount");
  toygen_cmd->add_option("--min-len", toy_args.spec.min_len,
                         "minimum source length");
  toygen_cmd->add_option("--max-len", toy_args.spec.max_len,
                         "maximum source length");
  toygen_cmd->add_option("--seed", toy_args.spec.seed, "random seed");
  toygen_cmd->add_option("--out", toy_args.out_prefix, "output path prefix")
      ->required();
  toygen_cmd->add_option("--pair-tag", toy_args.pair_tag,
                         "language-pair tag inserted into file names");

  GradcheckArgs gc_args;
  CLI::App* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "compare analytic gradients with finite differences");
  gradcheck_cmd->add_option("--seed", gc_args.seed, "random seed");
  gradcheck_cmd->add_option("--step", gc_args.h, "finite-difference step");
  gradcheck_cmd->add_option("--tol", gc_args.tolerance,
                            "relative error tolerance");
  gradcheck_cmd->add_option("--floor", gc_args.rel_floor,
                            "denominator floor for relative error");
  gradcheck_cmd->add_flag("--inject-fault", gc_args.inject_fault,
                          "corrupt one gradient to prove the check fails");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(train_cmd)) return do_train(train_args, out);
    if (app.got_subcommand(translate_cmd)) {
      tr_args.opts.length_normalize = !tr_no_length_norm;
      return do_translate(tr_args, in, out);
    }
    if (app.got_subcommand(bpe_cmd)) {
      bl_args.ops_given = ops_opt->count() > 0;
      if (bpe_cmd->got_subcommand(bpe_learn_cmd))
        return do_bpe_learn(bl_args, out);
      return do_bpe_apply(ba_args, in, out);
    }
    if (app.got_subcommand(bleu_cmd))
      return do_bleu(bleu_hyp, bleu_ref, bleu_smooth1, out);
    if (app.got_subcommand(translit_cmd)) return do_translit(in, out);
    if (app.got_subcommand(toygen_cmd)) return do_toygen(toy_args, out);
    if (app.got_subcommand(gradcheck_cmd)) return do_gradcheck(gc_args, out);
    err << "error: no subcommand\n";
    return 2;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace charnmt
