// SPDX-License-Identifier: Apache-2.0
// Python bindings for the main library operations.  Heavyweight work
// (training, decoding) goes through run_cli so Python callers get the
// same validated surface as the command line.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "charnmt/bleu.hpp"
#include "charnmt/bpe.hpp"
#include "charnmt/cli.hpp"
#include "charnmt/config.hpp"
#include "charnmt/corpus.hpp"
#include "charnmt/toygen.hpp"
#include "charnmt/translit.hpp"

namespace py = pybind11;
using namespace charnmt;

namespace {

using MergeList = std::vector<std::pair<std::string, std::string>>;

std::tuple<int, std::string, std::string> py_run_cli(
    std::vector<std::string> args, const std::string& stdin_text) {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = run_cli(std::move(args), in, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "character-level neural machine translation toolkit";
  m.attr("__version__") = "0.1.0";

  m.def(
      "bleu",
      [](const std::vector<std::string>& hyps,
         const std::vector<std::string>& refs, bool smooth1) {
        return corpus_bleu(hyps, refs, smooth1);
      },
      py::arg("hypotheses"), py::arg("references"),
      py::arg("smooth1") = false,
      "Corpus BLEU (0..100) over whitespace tokens, orders 1-4.");

  m.def(
      "learn_bpe",
      [](const std::vector<std::string>& lines, std::size_t ops) {
        return learn_bpe(lines, ops).merges;
      },
      py::arg("lines"), py::arg("num_ops"),
      "Learn byte-pair merges; returns (left, right) pairs in order.");

  m.def(
      "apply_bpe",
      [](const std::string& line, const MergeList& merges) {
        return apply_bpe(line, MergeTable{merges});
      },
      py::arg("line"), py::arg("merges"),
      "Segment one sentence into subword tokens.");

  m.def("bpe_detokenize", &bpe_detokenize, py::arg("tokens"),
        "Invert apply_bpe: join subwords, end-of-word markers to spaces.");

  m.def(
      "transliterate",
      [](const std::string& text) { return iso9_transliterate(text).text; },
      py::arg("text"), "ISO 9 Cyrillic-to-Latin transliteration.");

  m.def(
      "proportional_quotas",
      [](const std::vector<std::size_t>& sizes, std::size_t batch) {
        return proportional_quotas(sizes, batch).quotas;
      },
      py::arg("corpus_sizes"), py::arg("batch_size"),
      "Per-corpus minibatch quotas proportional to corpus sizes, "
      "each at least 1.");

  m.def("preset_names", &preset_names, "Available model preset names.");

  m.def(
      "preset_config",
      [](const std::string& name) {
        std::ostringstream os;
        preset_config(name).save(os);
        return os.str();
      },
      py::arg("name"), "Preset model configuration as config-file text.");

  m.def(
      "toy_pairs",
      [](const std::string& task, std::size_t n, const std::string& alphabet,
         std::size_t shift, std::size_t min_len, std::size_t max_len,
         std::uint64_t seed) {
        ToySpec spec;
        spec.task = toy_task_from_string(task);
        spec.count = n;
        spec.alphabet = alphabet;
        spec.shift = shift;
        spec.min_len = min_len;
        spec.max_len = max_len;
        spec.seed = seed;
        std::vector<std::pair<std::string, std::string>> out;
        for (auto& p : generate_toy_pairs(spec))
          out.emplace_back(std::move(p.source), std::move(p.target));
        return out;
      },
      py::arg("task"), py::arg("n"), py::arg("alphabet") = "abcdefghij",
      py::arg("shift") = 3, py::arg("min_len") = 5, py::arg("max_len") = 15,
      py::arg("seed") = 1,
      "Synthetic (source, target) pairs for the copy, reverse, or "
      "caesar task.");

  m.def("run_cli", &py_run_cli, py::arg("args"), py::arg("stdin_text") = "",
        "Run one CLI invocation; returns (exit_code, stdout, stderr).");
}
