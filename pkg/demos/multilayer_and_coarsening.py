"""Cross-layer tying and coarsened warm starts.

Part one sweeps the tying weight on a two-layer toy network and
reports how far tied node pairs end up from each other. Part two
compares a coarsen-then-train warm start against cold-start training
on a two-block graph.
"""

import numpy as np

from grembed.fixtures import stochastic_block_model, two_layer_graphs
from grembed.multiscale import harp_train, inter_layer_gap, ohmnet_train
from grembed.shallow import ShallowConfig, train_shallow

ga, gb = two_layer_graphs(n=12, p=0.35, seed=0)
print("two layers, tied node pairs, sweeping the penalty weight:")
for lam in (0.0, 0.1, 1.0, 10.0):
    cfg = ShallowConfig(dim=8, epochs=4, walk_length=10, walks_per_node=5,
                        window=3, seed=0)
    tables = ohmnet_train([ga, gb], lam=lam, config=cfg)
    print(f"  lam={lam:<5} inter-layer gap {inter_layer_gap(tables):8.4f}")

g, _ = stochastic_block_model((16, 16), 0.35, 0.05, seed=5)
print(f"\ntwo-block graph ({g.node_count} nodes): final mean pair loss")
wins = 0
for s in range(5):
    cfg = ShallowConfig(dim=8, epochs=4, lr=0.25, walk_length=10,
                        walks_per_node=8, window=4, seed=s)
    cold = train_shallow(g, "deepwalk", cfg).metadata["loss_history"][-1]
    warm = harp_train(g, "deepwalk", 1, cfg).metadata["loss_history"][-1]
    wins += warm <= cold
    print(f"  seed {s}: cold {cold:.4f}  warm {warm:.4f}")
print(f"warm start not worse on {wins}/5 seeds")
