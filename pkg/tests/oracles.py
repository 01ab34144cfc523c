"""Independent reference computations used by several test modules."""
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from poissonwalk.groups.trees import bfs_ball


def graph_distances(center, radius, neighbors):
    """All-pairs graph distances on the ball of ``radius`` around ``center``.

    Distances come from scipy's BFS on the adjacency matrix of the induced
    subgraph, independent of any closed-form metric.
    """
    ball = list(bfs_ball(center, radius, neighbors))
    index = {v: i for i, v in enumerate(ball)}
    rows, cols = [], []
    for v in ball:
        for w in neighbors(v):
            j = index.get(w)
            if j is not None:
                rows.append(index[v])
                cols.append(j)
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(ball), len(ball)))
    return ball, index, adj


def bfs_matrix(adj, sources):
    return shortest_path(adj, method="D", unweighted=True, indices=sources)


def reduce_letters(letters):
    """Free reduction of a letter sequence with an explicit stack."""
    out = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)
