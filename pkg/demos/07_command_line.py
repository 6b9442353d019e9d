"""
Command-line workflow
=====================

The same pipeline through the ``crae`` commands.
"""

import tempfile
from pathlib import Path

from crae.cli import main

work = Path(tempfile.mkdtemp())
main(["synth-data", str(work)])
cfg = work / "train.cfg"
cfg.write_text(cfg.read_text() + "epochs = 10\ntrain_split = train_split.tsv\n")

main(["vocab", str(work / "corpus.tsv"), str(work / "vocab.txt")])
main(["train", str(cfg)])
print((work / "train.log").read_text())
main(["recommend", str(work / "model.crae"), str(work / "train_split.tsv"), "-M", "5", "-o", str(work / "rec.tsv")])
print((work / "rec.tsv").read_text().splitlines()[:3])
main(["generate", str(work / "model.crae"), "--items", "0,1", "--corpus", str(work / "corpus.tsv")])
main(["eval", str(cfg), "--checkpoint", str(work / "model.crae")])
