"""
Joint training on the bundled synthetic data
============================================

Items belong to clusters that share words and user affinity. This script
trains the full model, then reports recommendation quality, reconstruction
accuracy and generation for items whose content was hidden.
"""

import dataclasses
import tempfile
from pathlib import Path

import numpy as np

from crae.cli import evaluate, main, prepare_run
from crae.config import load_config
from crae.drae import forward, generate, theta_from_item_factor
from crae.trainer import Trainer

work = Path(tempfile.mkdtemp())
main(["synth-data", str(work)])
cfg = load_config(work / "train.cfg")
print((work / "train.cfg").read_text())

###############################################################################
# Hold out the content of 20% of the items, then train.
cfg = dataclasses.replace(cfg, content_fraction=0.8)
run = prepare_run(cfg)
trainer = Trainer(run.vocab, run.sequences, run.train, cfg.train)
trainer.fit(callback=lambda r: r.epoch % 20 == 0 and print(f"epoch {r.epoch}: joint {r.joint_objective:.2f}"))
model = trainer.checkpoint()

###############################################################################
# Metrics. Random ranking would give recall@10 near 10/57.
for k, v in evaluate(model, run, cfg).items():
    print(f"{k:>12}: {v:.4f}")
acc = np.mean([np.mean(forward(s, model.params, s).logits.argmax(1) == np.array(s)) for s in run.sequences.values()])
print(f"token accuracy on visible items: {acc:.3f}")

###############################################################################
# Generated text for held-out items comes from their collaborative factors.
# Words carry their cluster in the prefix, so a match in cluster is the signal.
for j in run.heldout_items[:5]:
    ids = generate(theta_from_item_factor(model.factors.V[:, j]), model.params, 12, run.vocab.eos_id)
    print(f"item {j} (cluster {j % 5}): {' '.join(run.vocab.decode(ids))}")
