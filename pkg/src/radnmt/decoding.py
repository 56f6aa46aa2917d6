"""Beam-search translation.

Each step expands every live hypothesis over the full vocabulary
(PAD and BOS are never emitted), keeps the top beam_size candidates by
score, and moves EOS-ended ones to a completed pool. Search stops when
every kept candidate is finished or max_len is reached. Ties break
toward the lexicographically smaller token sequence, so output is
platform-deterministic.

Scores are cumulative log-probabilities; an optional length exponent
alpha rescales completed hypotheses as logprob / len^alpha (default 0,
i.e. off).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .corpus import BOS, EOS, PAD, EOS_FEATURE, Vocab
from .errors import DataError, RadnmtError
from .model import Annotations, ModelParams, decode_step, encode, init_decoder_state
from .radicals import RadicalTable

DEFAULT_UNK_TOKEN = "〓"  # geta mark, the CJK "missing glyph" convention


@dataclass
class Hypothesis:
    tokens: list[int]  # emitted ids, EOS included when finished
    logprob: float
    state: tuple = field(repr=False, default=None)  # (h, c, h_tilde) arrays
    finished: bool = False

    def score(self, length_alpha: float = 0.0) -> float:
        if length_alpha > 0.0 and self.tokens:
            return self.logprob / (len(self.tokens) ** length_alpha)
        return self.logprob


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    peak = logits.max(axis=-1, keepdims=True)
    stable = logits - peak
    return stable - np.log(np.exp(stable).sum(axis=-1, keepdims=True))


def default_max_len(src_len: int) -> int:
    return 2 * src_len + 10


def beam_search(
    params: ModelParams,
    src_ids: np.ndarray,
    feat_ids: np.ndarray | None,
    beam_size: int = 5,
    max_len: int | None = None,
    length_alpha: float = 0.0,
    n_best: int = 1,
) -> list[Hypothesis]:
    """Best-first decode of one source sentence; returns n_best hypotheses.

    If nothing finished by max_len the best unfinished hypothesis is
    returned with finished=False.
    """
    src_ids = np.asarray(src_ids, dtype=np.int64)
    if src_ids.size == 0:
        raise DataError("beam_search: empty source")
    if beam_size < 1:
        raise DataError(f"beam_size must be >= 1, got {beam_size}")
    if max_len is None:
        max_len = default_max_len(len(src_ids))
    src = src_ids[None, :]
    feats = None if feat_ids is None else np.asarray(feat_ids, dtype=np.int64)[None, :]
    mask = np.ones_like(src, dtype=bool)
    ann = encode(src, feats, mask, params)
    h0, c0 = init_decoder_state(ann, params)
    q = params.config.hidden_size
    start = Hypothesis([], 0.0, (h0.data[0], c0.data[0], np.zeros(q)))
    alive = [start]
    completed: list[Hypothesis] = []
    banned = (PAD, BOS)
    for _ in range(max_len):
        k = len(alive)
        tiled = Annotations(
            Tensor(np.repeat(ann.vectors.data, k, axis=0)),
            np.repeat(mask, k, axis=0),
            None,
            None,
        )
        y_prev = np.array([h.tokens[-1] if h.tokens else BOS for h in alive], dtype=np.int64)
        h_prev = Tensor(np.stack([h.state[0] for h in alive]))
        c_prev = Tensor(np.stack([h.state[1] for h in alive]))
        ht_prev = Tensor(np.stack([h.state[2] for h in alive]))
        logits, (h_new, c_new), h_tilde = decode_step(
            y_prev, ht_prev, (h_prev, c_prev), tiled, params
        )
        logprobs = _log_softmax(logits.data)  # (k, V)
        candidates = []
        for i, hyp in enumerate(alive):
            state = (h_new.data[i], c_new.data[i], h_tilde.data[i])
            for v in range(logprobs.shape[1]):
                if v in banned:
                    continue
                candidates.append(
                    Hypothesis(hyp.tokens + [v], hyp.logprob + float(logprobs[i, v]), state, v == EOS)
                )
        candidates.sort(key=lambda h: (-h.logprob, tuple(h.tokens)))
        kept = candidates[:beam_size]
        alive = [h for h in kept if not h.finished]
        completed.extend(h for h in kept if h.finished)
        if not alive:
            break
    ranked = sorted(completed, key=lambda h: (-h.score(length_alpha), tuple(h.tokens)))
    if not ranked:
        ranked = sorted(alive, key=lambda h: (-h.score(length_alpha), tuple(h.tokens)))
    return ranked[:n_best]


def translate_line(
    params: ModelParams,
    table: RadicalTable,
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    line: str,
    beam_size: int = 5,
    max_len: int | None = None,
    length_alpha: float = 0.0,
    unk_token: str = DEFAULT_UNK_TOKEN,
) -> str:
    src_ids = np.array(src_vocab.encode(line) + [EOS], dtype=np.int64)
    feats = np.array(table.annotate(line) + [EOS_FEATURE], dtype=np.int64)
    best = beam_search(params, src_ids, feats, beam_size, max_len, length_alpha)[0]
    return tgt_vocab.decode(best.tokens, unk_token=unk_token)


def translate_file(
    params: ModelParams,
    table: RadicalTable,
    src_vocab: Vocab,
    tgt_vocab: Vocab,
    input_path,
    output_path,
    beam_size: int = 5,
    max_len: int | None = None,
    length_alpha: float = 0.0,
    unk_token: str = DEFAULT_UNK_TOKEN,
) -> int:
    """Translate line by line, preserving order. Returns the line count."""
    input_path, output_path = Path(input_path), Path(output_path)
    count = 0
    with input_path.open(encoding="utf-8") as src, output_path.open(
        "w", encoding="utf-8"
    ) as dst:
        for lineno, raw in enumerate(src, 1):
            line = raw.rstrip("\n")
            try:
                out = translate_line(
                    params, table, src_vocab, tgt_vocab, line,
                    beam_size, max_len, length_alpha, unk_token,
                )
            except RadnmtError as exc:
                # keep the error class (and so the exit code), add the line
                raise type(exc)(f"{input_path}:{lineno}: {exc}") from exc
            except OSError as exc:
                raise DataError(f"{input_path}:{lineno}: {exc}") from exc
            dst.write(out + "\n")
            count += 1
    return count
