"""How the return and in-out parameters shape second-order walks.

On a barbell graph, outward bias (small q) pushes walks across the
bridge while inward bias (large q) keeps them circling their home
clique. We measure that with the mean hop distance between a walk's
start and end node.
"""

import numpy as np

from grembed.fixtures import barbell_graph
from grembed.walks import WalkConfig, sample_node2vec_walks

g = barbell_graph(5, 3)
n = g.node_count
dist = np.stack([g.bfs_distances(v) for v in range(n)])

print(f"barbell(5,3): {n} nodes, {g.edge_count} edges")
print("q      mean end displacement")
for q in (0.25, 0.5, 1.0, 2.0, 4.0):
    cfg = WalkConfig(length=10, walks_per_node=800, p=1.0, q=q, seed=0)
    corpus = sample_node2vec_walks(g, cfg)
    disp = np.mean([dist[w[0], w[-1]] for w in corpus.walks])
    bar = "#" * int(disp * 18)
    print(f"{q:<6} {disp:5.2f}  {bar}")

print()
print("small q explores outward, large q stays local")
