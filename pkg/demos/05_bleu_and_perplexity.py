"""The evaluation metrics, exercised on hand-checkable cases.

Corpus BLEU-4 with clipped modified precisions and the brevity
penalty, in character and whitespace modes, plus the uniform-model
perplexity identity. Run it:

    python demos/05_bleu_and_perplexity.py
"""

import math

import radnmt

print("=== BLEU identities ===")
lines = ["测定了水的温度。", "铁是金属。"]
print(f"  perfect match:      {radnmt.bleu(lines, lines).bleu:.2f}")
print(f"  disjoint corpora:   {radnmt.bleu(['abc'], ['xyz']).bleu:.2f}")

report = radnmt.bleu(["a b c d"], ["a b c d e"], tokenization="whitespace")
print()
print("=== the brevity penalty, by hand ===")
print("  hyp 'a b c d' vs ref 'a b c d e': every n-gram matches,")
print(f"  but BP = exp(1 - 5/4) = {math.exp(-0.25):.6f}")
print(f"  p1..p4 = {report.precisions}, BP = {report.brevity_penalty:.6f}")
print(f"  BLEU = {report.bleu:.4f}")

print()
print("=== one wrong character in char mode ===")
r = radnmt.bleu(["测定温度"], ["测定温差"], tokenization="char")
print(f"  p1..p4 = {tuple(round(p, 3) for p in r.precisions)} -> BLEU {r.bleu:.2f}")
r = radnmt.bleu(["测定温度"], ["测定温差"], tokenization="char", smoothing=True)
print(f"  with add-one smoothing on higher orders: BLEU {r.bleu:.2f}")

print()
print("=== perplexity of a know-nothing model equals the vocab size ===")
table = radnmt.load_bundled_table()
src_path, tgt_path = radnmt.toy_corpus_paths()
pairs = radnmt.read_parallel(src_path, tgt_path)
sv = radnmt.build_vocab([s for s, _ in pairs])
tv = radnmt.build_vocab([t for _, t in pairs])
examples = radnmt.encode_corpus(pairs, sv, tv, table)
config = radnmt.ModelConfig(
    src_vocab_size=len(sv), tgt_vocab_size=len(tv),
    char_embed_dim=8, feat_embed_dim=4, hidden_size=8, dropout=0.0,
)
params = radnmt.ModelParams.initialize(config, seed=0)
params["out_W"].data[:] = 0.0
params["out_b"].data[:] = 0.0
ppl = radnmt.perplexity(params, examples)
print(f"  target vocab size {len(tv)}, uniform-logit model ppl {ppl:.9f}")
