"""End-to-end acceptance suite.

Each test prints one [PASS]/[FAIL] line (run with `pytest -s` to see them
on success). The numbered criteria:

1. gradient fidelity of the full model on tiny configurations
2. zero-width feature path is bit-identical to the no-feature baseline
3. the toy corpus is memorized (ppl <= 1.05, beam-5 reproduces targets)
4. radical features generalize to unseen characters (lower test ppl)
5. beam search is exact on exhaustively checkable instances
6. post-clip gradient norms never exceed the threshold
7. radical assignment is total and rule-conformant
8. metric oracles (BLEU identities, uniform-model perplexity)
9. determinism of training and checkpoint persistence
"""

import time

import numpy as np
import pytest

import radnmt
from radnmt import autodiff as ad
from radnmt.autodiff import Tensor
from radnmt.corpus import Batch
from radnmt.decoding import beam_search
from radnmt.model import ModelParams, forward_loss, load_checkpoint
from radnmt.seeding import derive_rng
from radnmt.training import TrainConfig, perplexity, train

from conftest import (
    brute_force_best,
    greedy_decode,
    radical_probe_corpus,
    tiny_config,
)


def _report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


# ---------------------------------------------------------------------------


def _fd_instance(seed: int):
    config = tiny_config()  # q=4, p1=4, p2=2, vocabs of 8
    params = ModelParams.initialize(config, seed=seed)
    rng = derive_rng(seed, "gradcheck-data")
    src = rng.integers(4, 8, size=(1, 3))
    feats = rng.integers(1, 8, size=(1, 3))
    tgt = np.array([[1, int(rng.integers(4, 8)), 2]], dtype=np.int64)
    batch = Batch(src, feats, np.ones_like(src, dtype=bool), tgt, np.ones_like(tgt, dtype=bool))
    return params, batch


def test_criterion_1_gradient_fidelity():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        params, batch = _fd_instance(seed)

        def mean_loss():
            total, count = forward_loss(batch, params, train=False)
            return ad.mul(total, Tensor(np.asarray(1.0 / count)))

        worst = max(worst, ad.grad_check(mean_loss, params.all(), eps=2e-3))
    elapsed = time.perf_counter() - start
    _report(
        "criterion 1 (gradient fidelity)",
        worst <= 1e-4 and elapsed < 60.0,
        f"max rel err {worst:.3e} over 20 seeds in {elapsed:.1f}s",
    )


def test_criterion_2_ablation_identity(toy_data):
    sv, tv, examples = toy_data

    def run(feature_path: bool):
        config = radnmt.ModelConfig(
            src_vocab_size=len(sv), tgt_vocab_size=len(tv),
            char_embed_dim=24, feat_embed_dim=0, hidden_size=32, dropout=0.3,
        )
        params = ModelParams.initialize(config, seed=11, feature_path=feature_path)
        tconfig = TrainConfig(
            lr=1.0, decay_mode="none", dropout=0.3, epochs=3, seed=11, batch_size=10,
        )
        return train(params, examples, examples, tconfig)

    with_path = run(True)
    baseline = run(False)
    same_batches = with_path.batch_nll == baseline.batch_nll
    same_ppl = [e.dev_ppl for e in with_path.epochs] == [e.dev_ppl for e in baseline.epochs]
    _report(
        "criterion 2 (ablation identity)",
        same_batches and same_ppl,
        f"{len(with_path.batch_nll)} per-batch losses bit-identical over 3 epochs",
    )


def test_criterion_3_overfit_oracle(table, toy_pairs, toy_data):
    start = time.perf_counter()
    sv, tv, examples = toy_data
    config = radnmt.ModelConfig(
        src_vocab_size=len(sv), tgt_vocab_size=len(tv),
        char_embed_dim=24, feat_embed_dim=8, hidden_size=32, dropout=0.0,
    )
    params = ModelParams.initialize(config, seed=0)
    tconfig = TrainConfig(
        lr=2.0, decay_mode="none", dropout=0.0, epochs=200, seed=0,
        batch_size=5, eval_every=200,
    )
    train(params, examples, [], tconfig)
    ppl = perplexity(params, examples)
    hyps = [
        radnmt.translate_line(params, table, sv, tv, src, beam_size=5)
        for src, _ in toy_pairs
    ]
    refs = [tgt for _, tgt in toy_pairs]
    exact = sum(h == r for h, r in zip(hyps, refs))
    score = radnmt.bleu(hyps, refs, tokenization="char").bleu
    elapsed = time.perf_counter() - start
    _report(
        "criterion 3 (overfit oracle)",
        ppl <= 1.05 and exact == 50 and score == 100.0 and elapsed < 300.0,
        f"train ppl {ppl:.4f}, {exact}/50 exact, BLEU {score:.2f}, {elapsed:.0f}s",
    )


def test_criterion_4_radical_signal(table):
    results = []
    for seed in (0, 1, 2):
        train_pairs, test_pairs = radical_probe_corpus(seed)
        sv = radnmt.build_vocab([s for s, _ in train_pairs])
        tv = radnmt.build_vocab([t for _, t in train_pairs])
        train_set = radnmt.encode_corpus(train_pairs, sv, tv, table)
        test_set = radnmt.encode_corpus(test_pairs, sv, tv, table)

        def fit(feat_dim: int) -> float:
            config = radnmt.ModelConfig(
                src_vocab_size=len(sv), tgt_vocab_size=len(tv),
                char_embed_dim=12, feat_embed_dim=feat_dim, hidden_size=16, dropout=0.0,
            )
            params = ModelParams.initialize(config, seed, feature_path=feat_dim > 0)
            tconfig = TrainConfig(
                lr=2.0, decay_mode="none", dropout=0.0, epochs=40, seed=seed,
                batch_size=5, eval_every=40,
            )
            train(params, train_set, [], tconfig)
            return perplexity(params, test_set)

        results.append((fit(6), fit(0)))
    ok = all(feat < base for feat, base in results)
    detail = "; ".join(f"seed {i}: {f:.2f} vs {b:.2f}" for i, (f, b) in enumerate(results))
    _report("criterion 4 (radical signal, feature vs baseline test ppl)", ok, detail)


def _beam_model(seed, src_vocab=5, tgt_vocab=5, spread=0.5):
    config = radnmt.ModelConfig(
        src_vocab_size=src_vocab, tgt_vocab_size=tgt_vocab,
        char_embed_dim=3, feat_embed_dim=2, hidden_size=3,
        feat_vocab_size=6, dropout=0.0,
    )
    return ModelParams.initialize(config, seed, init_low=-spread, init_high=spread)


def test_criterion_5_beam_exactness():
    brute_ok = 0
    for seed in range(20):
        params = _beam_model(seed)
        rng = derive_rng(seed, "beam-input")
        n = int(rng.integers(0, 3))
        src = np.append(rng.integers(4, 5, size=n) if n else [], 2).astype(np.int64)
        feats = np.append(rng.integers(1, 6, size=n) if n else [], 0).astype(np.int64)
        score, tokens = brute_force_best(params, src, feats, max_len=3)
        best = beam_search(params, src, feats, beam_size=5, max_len=3)[0]
        brute_ok += best.tokens == tokens and abs(best.logprob - score) < 1e-10
    greedy_ok = 0
    for seed in range(20):
        params = _beam_model(seed, src_vocab=8, tgt_vocab=8, spread=0.4)
        rng = derive_rng(seed, "greedy-input")
        n = int(rng.integers(1, 4))
        src = np.append(rng.integers(4, 8, size=n), 2).astype(np.int64)
        feats = np.append(rng.integers(1, 6, size=n), 0).astype(np.int64)
        max_len = 2 * len(src) + 10
        tokens, _ = greedy_decode(params, src, feats, max_len)
        best = beam_search(params, src, feats, beam_size=1, max_len=max_len)[0]
        greedy_ok += best.tokens == tokens
    _report(
        "criterion 5 (beam exactness)",
        brute_ok == 20 and greedy_ok == 20,
        f"brute-force matches {brute_ok}/20, greedy matches {greedy_ok}/20",
    )


def test_criterion_6_clipping_contract(toy_data):
    sv, tv, examples = toy_data
    config = radnmt.ModelConfig(
        src_vocab_size=len(sv), tgt_vocab_size=len(tv),
        char_embed_dim=24, feat_embed_dim=8, hidden_size=32, dropout=0.0,
    )
    params = ModelParams.initialize(config, seed=0)
    tconfig = TrainConfig(
        lr=1.0, decay_mode="none", dropout=0.0, epochs=10, seed=0, batch_size=10,
    )
    report = train(params, examples, [], tconfig)
    worst = max(report.post_clip_norms)
    clipped = sum(n > 1.0 for n in report.pre_clip_norms)
    _report(
        "criterion 6 (clipping contract)",
        worst <= 1.0 + 1e-12,
        f"max post-clip norm {worst:.15f} over {report.steps} steps ({clipped} clipped)",
    )


def test_criterion_7_radical_totality(table):
    emitted = set()
    violations = []
    for cp in list(range(0x3041, 0x3097)) + list(range(0x30A1, 0x30FB)):
        rad = table.radical_of(chr(cp))
        emitted.add(rad)
        if rad == table.symbol_radical and cp in table.kana_map:
            src_cp, _ = table.kana_map[cp]
            if table.han_map.get(src_cp) != table.symbol_radical:
                violations.append(f"kana U+{cp:04X} hit symbol rule")
    for cp in range(128):
        ch = chr(cp)
        rad = table.radical_of(ch)
        emitted.add(rad)
        if ch.isdigit() and rad != table.numeral_map[ch]:
            violations.append(f"digit {ch}")
        if ch.isalpha() and rad != table.latin_radical:
            violations.append(f"letter {ch}")
    rng = derive_rng(7, "han-sweep")
    for cp in rng.integers(0x4E00, 0x9FFF, size=1000):
        cp = int(cp)
        rad = table.radical_of(chr(cp))
        emitted.add(rad)
        if cp not in table.han_map and rad != table.symbol_radical:
            violations.append(f"unmapped U+{cp:04X} not symbol")
    ok = not violations and emitted <= set(range(1, 215))
    _report(
        "criterion 7 (radical totality)",
        ok,
        f"{len(emitted)} distinct radicals emitted, violations: {violations[:3] or 'none'}",
    )


def test_criterion_8_metric_oracles(toy_data):
    lines = ["测定了水的温度。", "铁是金属。", "abc def"]
    self_bleu = radnmt.bleu(lines, lines, tokenization="char").bleu
    hand = radnmt.bleu(["a b c d"], ["a b c d e"], tokenization="whitespace").bleu
    sv, tv, _ = toy_data
    params = ModelParams.initialize(
        radnmt.ModelConfig(
            src_vocab_size=len(sv), tgt_vocab_size=len(tv),
            char_embed_dim=8, feat_embed_dim=4, hidden_size=8, dropout=0.0,
        ),
        seed=0,
    )
    params["out_W"].data[:] = 0.0
    params["out_b"].data[:] = 0.0
    _, _, examples = toy_data
    ppl = perplexity(params, examples)
    ok = (
        self_bleu == 100.0
        and abs(hand - 77.88) <= 0.01
        and abs(ppl - len(tv)) <= 1e-9
    )
    _report(
        "criterion 8 (metric oracles)",
        ok,
        f"self-BLEU {self_bleu}, hand example {hand:.4f}, uniform ppl {ppl:.9f} vs V={len(tv)}",
    )


def test_criterion_9_determinism_and_persistence(toy_data, tmp_path):
    sv, tv, examples = toy_data

    def run(ckpt_dir=None):
        config = radnmt.ModelConfig(
            src_vocab_size=len(sv), tgt_vocab_size=len(tv),
            char_embed_dim=16, feat_embed_dim=8, hidden_size=16, dropout=0.3,
        )
        params = ModelParams.initialize(config, seed=4)
        tconfig = TrainConfig(
            lr=1.0, decay_mode="plateau", dropout=0.3, epochs=3, seed=4,
            batch_size=10, checkpoint_dir=ckpt_dir,
        )
        return params, train(params, examples, examples[:10], tconfig)

    _, a = run()
    params, b = run(str(tmp_path / "ckpt"))
    identical = (
        a.to_tsv(include_timing=False) == b.to_tsv(include_timing=False)
        and a.batch_nll == b.batch_nll
        and a.pre_clip_norms == b.pre_clip_norms
    )
    live = perplexity(params, examples[:10])
    reloaded = perplexity(load_checkpoint(b.checkpoints[-1]), examples[:10])
    drift = abs(live - reloaded)
    _report(
        "criterion 9 (determinism and persistence)",
        identical and drift <= 1e-12,
        f"trajectories bit-identical; checkpoint ppl drift {drift:.2e}",
    )
