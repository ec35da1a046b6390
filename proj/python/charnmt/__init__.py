# SPDX-License-Identifier: Apache-2.0
"""Character-level neural machine translation toolkit."""

from charnmt._core import (
    __version__,
    apply_bpe,
    bleu,
    bpe_detokenize,
    learn_bpe,
    preset_config,
    preset_names,
    proportional_quotas,
    run_cli,
    toy_pairs,
    transliterate,
)

__all__ = [
    "__version__",
    "apply_bpe",
    "bleu",
    "bpe_detokenize",
    "learn_bpe",
    "preset_config",
    "preset_names",
    "proportional_quotas",
    "run_cli",
    "toy_pairs",
    "transliterate",
]
