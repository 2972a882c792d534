"""From reconstructed windows to a clustered pattern library.

Trains a pair on synthetic data, reconstructs the training windows, and
clusters the trailing context shapes into "up" and "down" profiles keyed
by the sign of the reconstructed forward return.  Prints the cluster
sizes and writes one SVG per class.
"""

from pathlib import Path

import numpy as np

from mutualae import SyntheticSpec, generate_synthetic
from mutualae.dataio import make_windows
from mutualae.pipeline import RunSettings, build_autoencoders, library_from_windows
from mutualae.autoencoder import AeConfig
from mutualae.dialogue import DialogueConfig, DialogueData, train_dialogue
from mutualae.svgplot import line_chart

OUT = Path(__file__).parent / "out"

settings = RunSettings(
    window=32, split=0.8,
    ae1=AeConfig(window=32, conv_channels=8, code_dim=8, lr=0.003),
    ae2=AeConfig(window=32, conv_channels=4, code_dim=6, lr=0.003),
    dialogue=DialogueConfig(epochs=65, pretrain_epochs=5, batches=10),
    clusters=2, profile_len=24)

data = generate_synthetic(SyntheticSpec(length=800, seed=11))
ws = make_windows(data.views[0], settings.window, 1, settings.split)
ae1, ae2 = build_autoencoders(settings, seed=4)
train_dialogue(ae1, ae2, DialogueData(ws.train, ws.train),
               settings.dialogue)

library = library_from_windows(ae1, ws, settings.clusters,
                               settings.profile_len, seed=4)
print(f"library for context {library.context_name!r}: "
      f"{library.n_up} windows ended with a positive reconstructed return, "
      f"{library.n_down} negative")
for side, profiles in (("up", library.up), ("down", library.down)):
    for p in profiles:
        print(f"  {side} cluster {p.cluster_id}: {p.members} members, "
              f"range [{p.values.min():.2f}, {p.values.max():.2f}]")

OUT.mkdir(exist_ok=True)
steps = np.arange(settings.profile_len)
for side, profiles in (("up", library.up), ("down", library.down)):
    line_chart(OUT / f"profiles_{side}.svg",
               {f"cluster {p.cluster_id} ({p.members})": (steps, p.values)
                for p in profiles},
               title=f"{side} profiles", x_label="step",
               y_label="z-scored context")
    print(f"wrote {OUT / f'profiles_{side}.svg'}")
