"""Evaluation subnetworks: labeled + sampled central nodes and their ego-nets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from txembed.txgraph import LabelSet, TxGraph


class InsufficientNodes(ValueError):
    pass


@dataclass(frozen=True)
class SubnetworkSpec:
    phishing_centrals: tuple[str, ...]
    random_centrals: tuple[str, ...]
    nodes: tuple[str, ...]
    num_edges: int
    seed: int

    @property
    def centrals(self) -> tuple[str, ...]:
        return self.phishing_centrals + self.random_centrals


def induced_subgraph(g: TxGraph, keep: np.ndarray) -> TxGraph:
    """Subgraph on node indices ``keep`` with every parent edge among them; ranks re-derived."""
    keep = np.unique(np.asarray(keep, dtype=np.int64))
    remap = np.full(g.num_nodes, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    mask = (remap[g.src] >= 0) & (remap[g.dst] >= 0)
    return TxGraph.from_edges([g.nodes[i] for i in keep], remap[g.src[mask]],
                              remap[g.dst[mask]], g.amount[mask], g.timestamp[mask],
                              g.direction)


def first_order_neighbors(g: TxGraph, centrals: np.ndarray) -> np.ndarray:
    """Centrals plus every node sharing an edge with one, in either direction."""
    is_c = np.zeros(g.num_nodes, dtype=bool)
    is_c[centrals] = True
    touch = is_c[g.src] | is_c[g.dst]
    return np.unique(np.concatenate([centrals, g.src[touch], g.dst[touch]]))


def extract_subnetwork(g: TxGraph, labels: LabelSet, seed: int,
                       n_random: int | None = None) -> tuple[SubnetworkSpec, TxGraph]:
    """Draw as many unlabeled centrals as there are phishing nodes and induce their ego-nets."""
    phish = labels.indices(g)
    if n_random is None:
        n_random = phish.size
    pool = np.setdiff1d(np.arange(g.num_nodes), phish)
    if pool.size < n_random:
        raise InsufficientNodes(f"need {n_random} unlabeled nodes, graph has {pool.size}")
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    rand = np.sort(rng.choice(pool, size=n_random, replace=False))
    centrals = np.concatenate([phish, rand])
    sub = induced_subgraph(g, first_order_neighbors(g, centrals))
    spec = SubnetworkSpec(
        phishing_centrals=tuple(g.nodes[i] for i in phish),
        random_centrals=tuple(g.nodes[i] for i in rand),
        nodes=sub.nodes,
        num_edges=sub.num_edges,
        seed=int(seed),
    )
    return spec, sub
