"""
Ranking and generation metrics
==============================
"""

from crae.metrics import average_precision, bleu, recall_at_m

rankings = [[4, 1, 7, 0, 3], [2, 0, 1, 3, 4]]
test = [{1, 3}, {2}]

###############################################################################
# recall@M averages the share of each user's test positives in the top M.
for M in (1, 2, 5):
    print(f"recall@{M} = {recall_at_m(rankings, test, M)[1]:.3f}")

###############################################################################
# Average precision divides by min(#positives, cutoff).
print("AP user 0:", average_precision(rankings[0], test[0], 500))

###############################################################################
# Corpus BLEU pools clipped n-gram counts over the corpus.
cand = [["the", "cat", "sat", "on", "a", "mat"]]
refs = [[["the", "cat", "sat", "on", "the", "mat"]]]
print(f"BLEU-4 = {bleu(cand, refs, 4):.2f}, BLEU-1 = {bleu(cand, refs, 1):.2f}")
