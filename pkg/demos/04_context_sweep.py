"""Ranking candidate context variables by pairing them up.

Every pair of candidate contexts shares the same target series; each
pair is trained and backtested independently (in parallel worker
processes) and the pairs are ranked by combined backtest return.  A
"twin" context (the first view under a second name) shows the duplicate
flag: identical series are still evaluated but marked, since their
agreement says nothing about two genuinely different views.

At this toy scale the return differences are small; the point is the
mechanics of the sweep, not the ranking itself.
"""

from mutualae import AeConfig, DialogueConfig, SyntheticSpec, generate_synthetic
from mutualae.pipeline import RunSettings
from mutualae.strategy import pair_sweep

settings = RunSettings(
    window=32, split=0.8,
    ae1=AeConfig(window=32, conv_channels=8, code_dim=8, lr=0.003),
    ae2=AeConfig(window=32, conv_channels=8, code_dim=6, lr=0.003),
    dialogue=DialogueConfig(epochs=85, pretrain_epochs=5, batches=10),
    clusters=2, profile_len=24)

data = generate_synthetic(SyntheticSpec(length=500, seed=3), n_views=2)
twin = data.views[0].with_context(data.views[0].x, "twin")
contexts = data.views + [twin]
print("contexts:", ", ".join(c.context_name for c in contexts))

results = pair_sweep(contexts, settings, seed=2, workers=2)
ranked = sorted(results, key=lambda r: r.combined_return, reverse=True)
print(f"{'pair':16s} {'combined':>9s} {'agreement':>10s} {'duplicate':>10s}")
for r in ranked:
    pair = f"{r.context_a}/{r.context_b}"
    print(f"{pair:16s} {r.combined_return:+9.4f} "
          f"{r.agreement_final:10.3f} {str(r.duplicate):>10s}")
