"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

import radnmt
from radnmt.autodiff import Tensor
from radnmt.corpus import BOS, EOS, PAD, Batch
from radnmt.decoding import _log_softmax
from radnmt.model import decode_step, encode, init_decoder_state
from radnmt.seeding import derive_rng


@pytest.fixture(scope="session")
def table():
    return radnmt.load_bundled_table()


@pytest.fixture(scope="session")
def toy_pairs():
    src, tgt = radnmt.toy_corpus_paths()
    return radnmt.read_parallel(src, tgt)


@pytest.fixture(scope="session")
def toy_data(table, toy_pairs):
    """(src_vocab, tgt_vocab, encoded examples) for the bundled toy corpus."""
    sv = radnmt.build_vocab([s for s, _ in toy_pairs])
    tv = radnmt.build_vocab([t for _, t in toy_pairs])
    return sv, tv, radnmt.encode_corpus(toy_pairs, sv, tv, table)


def tiny_config(**overrides) -> radnmt.ModelConfig:
    base = dict(
        src_vocab_size=8,
        tgt_vocab_size=8,
        char_embed_dim=4,
        feat_embed_dim=2,
        hidden_size=4,
        feat_vocab_size=8,
        dropout=0.0,
    )
    base.update(overrides)
    return radnmt.ModelConfig(**base)


def tiny_batch(seed: int, batch: int = 2, src_len: int = 3, tgt_chars: int = 2,
               src_vocab: int = 8, tgt_vocab: int = 8, feat_vocab: int = 8) -> Batch:
    """Random fully-unmasked batch with EOS-terminated rows."""
    rng = derive_rng(seed, "tiny-batch")
    src = np.concatenate(
        [rng.integers(4, src_vocab, size=(batch, src_len - 1)),
         np.full((batch, 1), EOS, dtype=np.int64)], axis=1,
    )
    feats = np.concatenate(
        [rng.integers(1, feat_vocab, size=(batch, src_len - 1)),
         np.zeros((batch, 1), dtype=np.int64)], axis=1,
    )
    tgt = np.concatenate(
        [np.full((batch, 1), BOS, dtype=np.int64),
         rng.integers(4, tgt_vocab, size=(batch, tgt_chars)),
         np.full((batch, 1), EOS, dtype=np.int64)], axis=1,
    )
    return Batch(src, feats, np.ones_like(src, dtype=bool), tgt, np.ones_like(tgt, dtype=bool))


# ---------------------------------------------------------------------------
# independent decoding oracles (deliberately not using radnmt.decoding search)


def replay_score(params, src, feats, tokens) -> float:
    """Sum of per-step log-softmax picks for a fixed token sequence."""
    mask = np.ones((1, len(src)), dtype=bool)
    ann = encode(src[None, :], None if feats is None else feats[None, :], mask, params)
    h, c = init_decoder_state(ann, params)
    ht = Tensor(np.zeros((1, params.config.hidden_size)))
    state, prev, total = (h, c), BOS, 0.0
    for tok in tokens:
        logits, state, ht = decode_step(np.array([prev]), ht, state, ann, params)
        total += float(_log_softmax(logits.data)[0][tok])
        prev = tok
    return total


def brute_force_best(params, src, feats, max_len: int):
    """Argmax over every emittable token sequence of length <= max_len.

    EOS terminates a sequence; sequences without EOS only count when
    nothing completed (mirroring the documented fallback). Ties break
    toward the lexicographically smaller sequence.
    """
    vocab = params.config.tgt_vocab_size
    non_eos = [v for v in range(vocab) if v not in (PAD, BOS, EOS)]
    completed = []
    for length in range(1, max_len + 1):
        for prefix in itertools.product(non_eos, repeat=length - 1):
            completed.append(list(prefix) + [EOS])
    candidates = completed or [list(p) for p in itertools.product(non_eos, repeat=max_len)]
    scored = [(replay_score(params, src, feats, c), c) for c in candidates]
    scored.sort(key=lambda x: (-x[0], tuple(x[1])))
    return scored[0]


def greedy_decode(params, src, feats, max_len: int):
    """Step-wise argmax decoder (lowest id wins ties); stops at EOS."""
    mask = np.ones((1, len(src)), dtype=bool)
    ann = encode(src[None, :], None if feats is None else feats[None, :], mask, params)
    h, c = init_decoder_state(ann, params)
    ht = Tensor(np.zeros((1, params.config.hidden_size)))
    state, prev = (h, c), BOS
    tokens, total = [], 0.0
    for _ in range(max_len):
        logits, state, ht = decode_step(np.array([prev]), ht, state, ann, params)
        lp = _log_softmax(logits.data)[0].copy()
        lp[PAD] = lp[BOS] = -np.inf
        best = lp.max()
        tok = int(np.flatnonzero(lp == best)[0])
        tokens.append(tok)
        total += float(lp[tok])
        prev = tok
        if tok == EOS:
            break
    return tokens, total


# ---------------------------------------------------------------------------
# synthetic corpus where the target is a pure function of the source radical

RADICAL_CLASSES = [
    ("海河湖池液泳洗浅", "深汽温", "水"),
    ("林森板橋村果東校", "機械析", "木"),
    ("語話読計証説課記", "議試詞", "言"),
    ("金鉄銀銅鋼針鏡鉛", "鈴銭録", "金"),
    ("思想意感情忘急悪", "念恵態", "心"),
    ("明時暗春星暖早昨", "昼晴曜", "日"),
]


def radical_probe_corpus(seed: int, n_train: int = 160, n_test: int = 48):
    """Train pairs use one character pool, test pairs a disjoint pool with
    the same radicals, so only the radical feature generalizes."""
    rng = derive_rng(seed, "radical-probe")

    def gen(n, column):
        pairs = []
        for _ in range(n):
            length = int(rng.integers(4, 8))
            src = tgt = ""
            for _ in range(length):
                ci = int(rng.integers(len(RADICAL_CLASSES)))
                pool = RADICAL_CLASSES[ci][column]
                src += pool[int(rng.integers(len(pool)))]
                tgt += RADICAL_CLASSES[ci][2]
            pairs.append((src, tgt))
        return pairs

    return gen(n_train, 0), gen(n_test, 1)
