"""Temporal softmax-bias language modeling.

The native core does the work; this package converts configs and reports
between Python dicts and the JSON the core reads and writes.
"""

from __future__ import annotations

import json
import os
from typing import Any, Iterable, Mapping, Optional, Sequence

from . import _core
from ._core import (
    EOS_ID,
    UNK_ID,
    ConfigError,
    ContractError,
    DimensionError,
    Error,
    HistoryError,
    IoError,
    Vocabulary,
    content_meteor,
    content_perplexity,
    meteor,
    meteor_align,
    perplexity,
    sign_test,
    tokenize,
)

__all__ = [
    "EOS_ID",
    "UNK_ID",
    "COMMANDS",
    "ConfigError",
    "ContractError",
    "DimensionError",
    "Error",
    "HistoryError",
    "IoError",
    "Model",
    "Vocabulary",
    "content_meteor",
    "content_perplexity",
    "generate_drift_corpus",
    "meteor",
    "meteor_align",
    "perplexity",
    "resolve_config",
    "run",
    "sign_test",
    "tokenize",
]

COMMANDS = ("ingest", "synth", "train", "build-embeddings", "eval", "generate", "freq-csv")


def resolve_config(
    path: Optional[os.PathLike | str] = None,
    seed: Optional[int] = None,
    overrides: Sequence[str] = (),
) -> dict:
    """Load a config file and apply ``key.path=value`` overrides and the seed."""
    return json.loads(_core.resolve_config_json(path, seed, list(overrides)))


def run(command: str, config: Mapping[str, Any], out: os.PathLike | str) -> str:
    """Run one pipeline command and return its console summary."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    return _core.run_json(command, json.dumps(config), os.fspath(out))


def generate_drift_corpus(**spec: Any) -> dict:
    """Synthetic year-sliced corpus with programmed frequency drift.

    Keyword arguments are drift-spec fields (``rising``, ``years``,
    ``docs_per_year``, ``seed``, ...). Returns ``documents`` as a list of
    ``{"year", "text"}`` records, the ground-truth ``labels`` and the
    template ``function_words``.
    """
    return json.loads(_core.generate_drift_corpus_json(json.dumps(spec)))


class Model:
    """A trained checkpoint loaded against the dataset it was trained on."""

    def __init__(self, checkpoint, dataset, embeddings=None):
        self._m = _core.Model(os.fspath(checkpoint), os.fspath(dataset),
                              None if embeddings is None else os.fspath(embeddings))

    @property
    def vocab(self) -> Vocabulary:
        return self._m.vocab

    @property
    def head(self) -> str:
        return self._m.head

    @property
    def checkpoint_id(self) -> str:
        return self._m.checkpoint_id

    @property
    def stopwords(self) -> list:
        return self._m.stopwords

    @property
    def years(self) -> list:
        return self._m.years

    def evaluate(self, split: str = "test") -> dict:
        """PPL and CPL over a dataset split."""
        return self._m.evaluate(split)

    def next_token_distribution(self, prefix: Iterable[int], year: int) -> list:
        prefix = list(prefix)
        if not prefix or prefix[0] != EOS_ID:
            prefix = [EOS_ID] + prefix
        return self._m.next_token_distribution(prefix, year)

    def generate(self, year: int, seed: int, **decoding: Any) -> str:
        return self._m.generate_json(year, seed, json.dumps(decoding))
