import numpy as np
import pytest

import radnmt
from radnmt.corpus import BOS, EOS, PAD
from radnmt.decoding import Hypothesis, beam_search, translate_file, translate_line
from radnmt.errors import DataError
from radnmt.model import ModelParams
from radnmt.seeding import derive_rng

from conftest import brute_force_best, greedy_decode, replay_score


def _rand_model(seed, src_vocab=5, tgt_vocab=5, spread=0.5):
    config = radnmt.ModelConfig(
        src_vocab_size=src_vocab, tgt_vocab_size=tgt_vocab,
        char_embed_dim=3, feat_embed_dim=2, hidden_size=3,
        feat_vocab_size=6, dropout=0.0,
    )
    return ModelParams.initialize(config, seed, init_low=-spread, init_high=spread)


def _rand_input(seed, src_vocab=5, max_chars=3):
    rng = derive_rng(seed, "beam-input")
    n = int(rng.integers(0, max_chars))
    src = np.append(rng.integers(4, src_vocab, size=n) if n else [], EOS).astype(np.int64)
    feats = np.append(rng.integers(1, 6, size=n) if n else [], 0).astype(np.int64)
    return src, feats


def test_empty_source_raises():
    params = _rand_model(0)
    with pytest.raises(DataError, match="empty"):
        beam_search(params, np.array([], dtype=np.int64), None)


def test_pad_and_bos_never_emitted():
    for seed in range(10):
        params = _rand_model(seed)
        src, feats = _rand_input(seed)
        best = beam_search(params, src, feats, beam_size=5, max_len=6)[0]
        assert PAD not in best.tokens and BOS not in best.tokens


def test_finished_iff_ends_with_eos():
    for seed in range(10):
        params = _rand_model(seed)
        src, feats = _rand_input(seed)
        for hyp in beam_search(params, src, feats, beam_size=4, max_len=5, n_best=4):
            assert hyp.finished == (hyp.tokens[-1] == EOS)


def test_logprob_non_increasing_with_length():
    assert Hypothesis([4], -0.5).score() == -0.5
    params = _rand_model(1)
    src, feats = _rand_input(1)
    best = beam_search(params, src, feats, beam_size=3, max_len=5)[0]
    assert best.logprob <= 0.0


def test_hypothesis_logprob_matches_independent_replay():
    for seed in range(8):
        params = _rand_model(seed, src_vocab=7, tgt_vocab=7)
        rng = derive_rng(seed, "replay-input")
        src = np.append(rng.integers(4, 7, size=3), EOS).astype(np.int64)
        feats = np.append(rng.integers(1, 6, size=3), 0).astype(np.int64)
        best = beam_search(params, src, feats, beam_size=4)[0]
        assert best.logprob == pytest.approx(
            replay_score(params, src, feats, best.tokens), abs=1e-10
        )


@pytest.mark.parametrize("seed", range(20))
def test_beam5_equals_brute_force_on_tiny_models(seed):
    params = _rand_model(seed)
    src, feats = _rand_input(seed)
    score, tokens = brute_force_best(params, src, feats, max_len=3)
    best = beam_search(params, src, feats, beam_size=5, max_len=3)[0]
    assert best.tokens == tokens
    assert best.logprob == pytest.approx(score, abs=1e-10)


def test_huge_beam_is_structurally_exhaustive():
    # with beam >= every candidate count, no pruning can occur at all
    for seed in (3, 4, 5):
        params = _rand_model(seed)
        src, feats = _rand_input(seed)
        score, tokens = brute_force_best(params, src, feats, max_len=3)
        best = beam_search(params, src, feats, beam_size=50, max_len=3)[0]
        assert best.tokens == tokens


@pytest.mark.parametrize("seed", range(20))
def test_beam1_equals_independent_greedy(seed):
    params = _rand_model(seed, src_vocab=8, tgt_vocab=8, spread=0.4)
    rng = derive_rng(seed, "greedy-input")
    n = int(rng.integers(1, 4))
    src = np.append(rng.integers(4, 8, size=n), EOS).astype(np.int64)
    feats = np.append(rng.integers(1, 6, size=n), 0).astype(np.int64)
    max_len = 2 * len(src) + 10
    tokens, score = greedy_decode(params, src, feats, max_len)
    best = beam_search(params, src, feats, beam_size=1, max_len=max_len)[0]
    assert best.tokens == tokens
    assert best.logprob == pytest.approx(score, abs=1e-10)


def test_beam_monotonicity():
    # under pure logprob scoring a wider beam never ends with a worse completion
    for seed in range(10):
        params = _rand_model(seed, src_vocab=6, tgt_vocab=6)
        rng = derive_rng(seed, "mono-input")
        src = np.append(rng.integers(4, 6, size=2), EOS).astype(np.int64)
        feats = np.append(rng.integers(1, 6, size=2), 0).astype(np.int64)
        narrow = beam_search(params, src, feats, beam_size=1, max_len=6)[0]
        wide = beam_search(params, src, feats, beam_size=5, max_len=6)[0]
        if narrow.finished and wide.finished:
            assert wide.logprob >= narrow.logprob - 1e-12


def test_unfinished_fallback_is_flagged():
    # beam 1, one step, EOS not the argmax: nothing completes
    params = _rand_model(0)
    best = beam_search(params, np.array([4, EOS]), np.array([1, 0]), beam_size=1, max_len=1)[0]
    assert not best.finished
    assert best.tokens and best.tokens[-1] != EOS


def test_n_best_is_sorted_and_distinct():
    params = _rand_model(2)
    src, feats = _rand_input(2)
    hyps = beam_search(params, src, feats, beam_size=5, max_len=4, n_best=5)
    scores = [h.logprob for h in hyps]
    assert scores == sorted(scores, reverse=True)
    assert len({tuple(h.tokens) for h in hyps}) == len(hyps)


def test_translate_file_order_and_determinism(table, toy_data, tmp_path):
    sv, tv, examples = toy_data
    config = radnmt.ModelConfig(
        src_vocab_size=len(sv), tgt_vocab_size=len(tv),
        char_embed_dim=8, feat_embed_dim=4, hidden_size=8, dropout=0.0,
    )
    params = ModelParams.initialize(config, seed=0)
    src = tmp_path / "in.txt"
    src.write_text("鉄の実験。\n水を測定した。\n", encoding="utf-8")
    out1, out2 = tmp_path / "out1.txt", tmp_path / "out2.txt"
    assert translate_file(params, table, sv, tv, src, out1, beam_size=3) == 2
    translate_file(params, table, sv, tv, src, out2, beam_size=3)
    assert out1.read_bytes() == out2.read_bytes()
    assert len(out1.read_text(encoding="utf-8").splitlines()) == 2


def test_translate_empty_file(table, toy_data, tmp_path):
    sv, tv, _ = toy_data
    params = ModelParams.initialize(
        radnmt.ModelConfig(
            src_vocab_size=len(sv), tgt_vocab_size=len(tv),
            char_embed_dim=8, feat_embed_dim=4, hidden_size=8, dropout=0.0,
        ),
        seed=1,
    )
    src, out = tmp_path / "empty.txt", tmp_path / "out.txt"
    src.write_text("", encoding="utf-8")
    assert translate_file(params, table, sv, tv, src, out) == 0
    assert out.read_text(encoding="utf-8") == ""


def test_translate_line_renders_unk_placeholder(table, toy_data):
    sv, tv, _ = toy_data
    params = ModelParams.initialize(
        radnmt.ModelConfig(
            src_vocab_size=len(sv), tgt_vocab_size=5,  # tiny target: mostly UNK
            char_embed_dim=8, feat_embed_dim=4, hidden_size=8, dropout=0.0,
        ),
        seed=2,
    )
    small_tv = radnmt.build_vocab(["x"])
    out = translate_line(params, table, sv, small_tv, "鉄の実験。", beam_size=2, unk_token="?")
    assert set(out) <= {"x", "?"}
