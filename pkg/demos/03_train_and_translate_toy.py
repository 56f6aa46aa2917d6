"""Train on the bundled 50-pair toy corpus, then beam-translate it.

Plain SGD with gradient clipping memorizes the corpus in under a
minute; beam search then reproduces the training targets. Run it:

    python demos/03_train_and_translate_toy.py
"""

import time

import radnmt

table = radnmt.load_bundled_table()
src_path, tgt_path = radnmt.toy_corpus_paths()
pairs = radnmt.read_parallel(src_path, tgt_path)
src_vocab = radnmt.build_vocab([s for s, _ in pairs])
tgt_vocab = radnmt.build_vocab([t for _, t in pairs])
examples = radnmt.encode_corpus(pairs, src_vocab, tgt_vocab, table)
print(f"{len(pairs)} pairs, source vocab {len(src_vocab)}, target vocab {len(tgt_vocab)}")

config = radnmt.ModelConfig(
    src_vocab_size=len(src_vocab), tgt_vocab_size=len(tgt_vocab),
    char_embed_dim=24, feat_embed_dim=8, hidden_size=32, dropout=0.0,
)
params = radnmt.ModelParams.initialize(config, seed=0)
tconfig = radnmt.TrainConfig(
    lr=2.0, decay_mode="none", dropout=0.0, epochs=200, seed=0,
    batch_size=5, eval_every=20,
)

start = time.perf_counter()
report = radnmt.train(params, examples, examples, tconfig)
print(f"trained {len(report.epochs)} epochs in {time.perf_counter() - start:.0f}s")
print("epoch  train_nll  train_ppl")
for e in report.epochs:
    if e.epoch % 40 == 0:
        print(f"{e.epoch:5d}  {e.train_nll:9.4f}  {e.dev_ppl:9.4f}")

print()
print("=== beam-5 translations of training sources ===")
for src, ref in pairs[:6]:
    hyp = radnmt.translate_line(params, table, src_vocab, tgt_vocab, src, beam_size=5)
    mark = "=" if hyp == ref else "!"
    print(f" {mark} {src}")
    print(f"   -> {hyp}")

hyps = [radnmt.translate_line(params, table, src_vocab, tgt_vocab, s, beam_size=5) for s, _ in pairs]
refs = [t for _, t in pairs]
exact = sum(h == r for h, r in zip(hyps, refs))
score = radnmt.bleu(hyps, refs, tokenization="char")
print()
print(f"exact reproductions: {exact}/{len(pairs)}, character BLEU {score.bleu:.2f}")
