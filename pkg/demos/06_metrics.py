"""
Mergeable evaluation metrics
============================

Every metric accumulates a small integer state, and two states for the
same metric merge by field-wise addition.  Score shards independently,
merge, and the result is identical to scoring everything in one pass.
"""

from dataforge import get_metric
from dataforge.metrics import merge

preds = [1, 0, 1, 1, 0, 1, 0, 0]
refs = [1, 0, 0, 1, 0, 1, 1, 0]

m = get_metric("accuracy")
m.add_batch(preds, refs)
print("accuracy:", m.compute())

m = get_metric("f1", positive_label=1)
m.add_batch(preds, refs)
print("f1:", m.compute())

# Shard the same pairs across two workers and merge the states.
a = get_metric("f1", positive_label=1)
a.add_batch(preds[:4], refs[:4])
b = get_metric("f1", positive_label=1)
b.add_batch(preds[4:], refs[4:])
merged = merge(a, b)
print("merged == single pass:", merged.compute() == m.compute())

# States survive JSON, so workers can ship them over the wire.
print("shard state:", a.state_obj())

# Corpus BLEU with multiple references per candidate.
bleu = get_metric("bleu")
bleu.add_batch(
    ["the cat sat on the mat there", "a quick brown fox"],
    [
        ["the cat sat on the mat there", "a cat was sitting on the mat"],
        ["the quick brown fox jumps"],
    ],
)
out = bleu.compute()
print("bleu:", round(out["bleu"], 4), "precisions:",
      [round(p, 3) for p in out["precisions"]],
      "bp:", round(out["brevity_penalty"], 4))

# Short outputs can zero the higher n-gram orders; smoothing keeps the
# geometric mean finite for anything with at least one matching unigram.
smoothed = get_metric("bleu", smooth=True)
smoothed.add_batch(["the cat"], [["the cat sat"]])
print("smoothed bleu:", round(smoothed.compute()["bleu"], 4))
