"""Why feed radicals in at all? Generalization to unseen characters.

A synthetic task where the correct target character is a pure function
of the source character's radical class. Test sentences use characters
never seen in training, but whose radicals were seen. The model with a
radical embedding keeps predicting; the character-only baseline faces
nothing but <unk>. Run it:

    python demos/04_radical_signal.py
"""

import radnmt
from radnmt.seeding import derive_rng

table = radnmt.load_bundled_table()

CLASSES = [
    ("海河湖池液泳洗浅", "深汽温", "水"),
    ("林森板橋村果東校", "機械析", "木"),
    ("語話読計証説課記", "議試詞", "言"),
    ("金鉄銀銅鋼針鏡鉛", "鈴銭録", "金"),
    ("思想意感情忘急悪", "念恵態", "心"),
    ("明時暗春星暖早昨", "昼晴曜", "日"),
]


def gen(rng, n, column):
    pairs = []
    for _ in range(n):
        length = int(rng.integers(4, 8))
        src = tgt = ""
        for _ in range(length):
            ci = int(rng.integers(len(CLASSES)))
            pool = CLASSES[ci][column]
            src += pool[int(rng.integers(len(pool)))]
            tgt += CLASSES[ci][2]
        pairs.append((src, tgt))
    return pairs


rng = derive_rng(0, "radical-probe")
train_pairs = gen(rng, 160, 0)
test_pairs = gen(rng, 48, 1)
print("a training pair:  ", train_pairs[0][0], "->", train_pairs[0][1])
print("a test pair:      ", test_pairs[0][0], "->", test_pairs[0][1])
print("(test characters never occur in training; their radicals do)")

src_vocab = radnmt.build_vocab([s for s, _ in train_pairs])
tgt_vocab = radnmt.build_vocab([t for _, t in train_pairs])
train_set = radnmt.encode_corpus(train_pairs, src_vocab, tgt_vocab, table)
test_set = radnmt.encode_corpus(test_pairs, src_vocab, tgt_vocab, table)


def fit(feat_dim):
    config = radnmt.ModelConfig(
        src_vocab_size=len(src_vocab), tgt_vocab_size=len(tgt_vocab),
        char_embed_dim=12, feat_embed_dim=feat_dim, hidden_size=16, dropout=0.0,
    )
    params = radnmt.ModelParams.initialize(config, seed=0, feature_path=feat_dim > 0)
    tconfig = radnmt.TrainConfig(
        lr=2.0, decay_mode="none", dropout=0.0, epochs=40, seed=0,
        batch_size=5, eval_every=40,
    )
    radnmt.train(params, train_set, [], tconfig)
    return radnmt.perplexity(params, train_set), radnmt.perplexity(params, test_set)


print()
print("training two models with identical seeds and schedules...")
feat_train, feat_test = fit(6)
base_train, base_test = fit(0)
print()
print(f"{'':24s}{'train ppl':>10s}{'test ppl':>10s}")
print(f"{'with radical feature':24s}{feat_train:10.3f}{feat_test:10.3f}")
print(f"{'character-only baseline':24s}{base_train:10.3f}{base_test:10.3f}")
print()
print("both fit the training data; only the radical-aware model")
print("carries that knowledge over to characters it has never seen.")
