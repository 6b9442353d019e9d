"""
Denoising recurrent autoencoder
===============================

Words are corrupted by replacing them with a wildcard token; the network
reconstructs the clean sentence from the corrupted one.
"""

import numpy as np

from crae.corpus import SequencePair, build_vocabulary, encode_document, wildcard_corrupt
from crae.drae import DraeParams, drae_loss_and_grads, forward, reconstruct
from crae.trainer import Adam

docs = [s.split() for s in ["the cat sat on the warm mat", "a dog ran in the green park",
                            "birds sing at dawn", "rain falls on the quiet town"]]
vocab = build_vocabulary(docs)
seqs = [encode_document(d, vocab) for d in docs]
rng = np.random.default_rng(0)
params = DraeParams.init(vocab.size, 32, 8, rng)
opt = Adam(params.arrays())

###############################################################################
# Corruption keeps length and the end marker.
print(vocab.decode(wildcard_corrupt(seqs[0], 0.4, 1, vocab.wildcard_id, vocab.eos_id), strip_eos=False))

###############################################################################
# Train on freshly corrupted copies each epoch, clipping the gradient norm at 5.
for epoch in range(1, 301):
    total = 0.0
    for s in seqs:
        pair = SequencePair(0, s, wildcard_corrupt(s, 0.2, rng, vocab.wildcard_id, vocab.eos_id))
        parts, grads, _ = drae_loss_and_grads(pair, params)
        norm = np.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
        for g in grads.values():
            g *= min(1.0, 5.0 / norm)
        opt.apply(params.arrays(), grads, 0.005)
        total += parts.recon
    if epoch % 100 == 0:
        print(f"epoch {epoch}: reconstruction loss {total:.3f}")

###############################################################################
# Reconstruct clean and corrupted inputs.
for s in seqs:
    noisy = wildcard_corrupt(s, 0.2, 7, vocab.wildcard_id, vocab.eos_id)
    print(" ".join(vocab.decode(noisy)), "->", " ".join(vocab.decode(reconstruct(noisy, params, 20, vocab.eos_id))))
acc = np.mean([np.mean(forward(s, params, s).logits.argmax(1) == np.array(s)) for s in seqs])
print(f"token accuracy on clean input: {acc:.3f}")
