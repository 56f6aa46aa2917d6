"""Every character gets exactly one of the 214 Kangxi radicals.

Han characters resolve through the bundled table; kana inherit the
radical of the kanji they were derived from; digits borrow the Chinese
numeral's radical; Latin letters share 英's radical and everything else
shares 符's. Run it:

    python demos/01_radical_features.py
"""

import radnmt
from radnmt.radicals import describe, radical_glyph

table = radnmt.load_bundled_table()

print("=== the five assignment rules ===")
for ch in ["鉄", "語", "あ", "ア", "7", "０", "Q", "ｘ", "。", "!"]:
    print("  " + describe(ch, table))

print()
print("=== kana inherit their source kanji's radical ===")
for kana in "あかさたなはまやらわ":
    src_cp, rad = table.kana_map[ord(kana)]
    print(f"  {kana} <- {chr(src_cp)} -> #{rad} {radical_glyph(rad)}")

print()
print("=== a mixed sentence, annotated position by position ===")
sentence = "溝幅は10mm以上が必要と推定した。"
radicals = table.annotate(sentence)
print("  " + sentence)
print("  " + " ".join(f"{ch}|{r}" for ch, r in zip(sentence, radicals)))
print("  radicals: " + "".join(radical_glyph(r) for r in radicals))

print()
print("=== totality: anything at all resolves ===")
for ch in ["€", "μ", "㐀", "🎌"]:
    print("  " + describe(ch, table))
print(f"  (unknown Han characters seen so far: {table.unknown_han_count})")
