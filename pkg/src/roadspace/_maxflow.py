"""Dinic max-flow on float64 residual capacities, compiled with numba.

Arcs are stored in pairs: arc 2i is a forward arc and arc 2i+1 its reverse, so
the reverse of arc a is always a ^ 1. Undirected grid edges use one pair with
the same capacity on both arcs. Augmentations subtract the path bottleneck,
which zeroes the bottleneck arc exactly in IEEE arithmetic, so each phase
terminates without any epsilon thresholds.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def max_flow(n_nodes, arc_to, arc_cap, adj_start, adj_list, source, sink):
    """Run Dinic to completion; arc_cap is mutated into the residual graph."""
    level = np.empty(n_nodes, dtype=np.int32)
    it = np.empty(n_nodes, dtype=np.int64)
    queue = np.empty(n_nodes, dtype=np.int64)
    path = np.empty(n_nodes + 1, dtype=np.int64)
    total = 0.0

    while True:
        # BFS level graph over residual arcs
        level[:] = -1
        level[source] = 0
        queue[0] = source
        head, tail = 0, 1
        while head < tail:
            u = queue[head]
            head += 1
            for k in range(adj_start[u], adj_start[u + 1]):
                a = adj_list[k]
                v = arc_to[a]
                if arc_cap[a] > 0.0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue[tail] = v
                    tail += 1
        if level[sink] < 0:
            return total

        # blocking flow: DFS with per-node arc cursors
        for i in range(n_nodes):
            it[i] = adj_start[i]
        u = source
        depth = 0
        while True:
            if u == sink:
                bottleneck = np.inf
                for i in range(depth):
                    a = path[i]
                    if arc_cap[a] < bottleneck:
                        bottleneck = arc_cap[a]
                for i in range(depth):
                    a = path[i]
                    arc_cap[a] -= bottleneck
                    arc_cap[a ^ 1] += bottleneck
                total += bottleneck
                u = source
                depth = 0
                continue
            advanced = False
            while it[u] < adj_start[u + 1]:
                a = adj_list[it[u]]
                v = arc_to[a]
                if arc_cap[a] > 0.0 and level[v] == level[u] + 1:
                    path[depth] = a
                    depth += 1
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                level[u] = -1  # exhausted for this phase
                if depth == 0:
                    break
                depth -= 1
                u = arc_to[path[depth] ^ 1]
                it[u] += 1


@njit(cache=True)
def source_side(n_nodes, arc_to, arc_cap, adj_start, adj_list, source):
    """Nodes reachable from the source in the residual graph (min-cut side)."""
    seen = np.zeros(n_nodes, dtype=np.bool_)
    queue = np.empty(n_nodes, dtype=np.int64)
    seen[source] = True
    queue[0] = source
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(adj_start[u], adj_start[u + 1]):
            a = adj_list[k]
            v = arc_to[a]
            if arc_cap[a] > 0.0 and not seen[v]:
                seen[v] = True
                queue[tail] = v
                tail += 1
    return seen
