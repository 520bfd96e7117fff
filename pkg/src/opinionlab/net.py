"""Listening-weight networks, canonical generators and stationary weights."""

import json
from dataclasses import dataclass, field
from math import gcd
from typing import NamedTuple, Optional

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

from ._validation import check_weight_matrix
from .exceptions import InvalidNetwork, InvalidSize, NotStronglyConnected


@dataclass(frozen=True, eq=False)
class Network:
    """Row-stochastic matrix ``A`` where ``A[i, j]`` is the weight i puts on j.

    The diagonal is zero; a player's weight on her own previous opinion is
    carried by ``1 - gamma_i`` in the dynamics.
    """

    A: np.ndarray
    labels: Optional[tuple] = field(default=None)

    def __post_init__(self):
        A = check_weight_matrix(self.A)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != A.shape[0]:
                raise InvalidSize("labels must have one entry per player")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.A.shape[0]

    def neighbors(self, i):
        return np.flatnonzero(self.A[i] > 0)

    @classmethod
    def from_adjacency(cls, adjacency, labels=None):
        """Row-normalize a non-negative adjacency matrix (uniform listening)."""
        return cls(check_weight_matrix(adjacency, normalize=True), labels)

    def to_dict(self):
        out = {"n": self.n, "rows": self.A.tolist()}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data):
        rows = np.asarray(data["rows"], dtype=np.float64)
        if "n" in data and rows.shape != (data["n"], data["n"]):
            raise InvalidNetwork(f"'rows' shape {rows.shape} does not match n={data['n']}")
        return cls(rows, data.get("labels"))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"Network(n={self.n})"


class Connectivity(NamedTuple):
    connected_weak: bool   # support digraph strongly connected
    primitive: bool        # some power A^k is entrywise positive


def _support(net):
    return (np.asarray(net.A) > 0).astype(np.int8)


def is_strongly_connected(net):
    ncomp, _ = connected_components(_support(net), directed=True, connection="strong")
    return ncomp == 1


def period(net):
    """Period of the (strongly connected) support digraph."""
    S = _support(net)
    order, pred = breadth_first_order(S, 0, directed=True, return_predecessors=True)
    level = np.full(net.n, -1)
    level[0] = 0
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    g = 0
    for u, v in zip(*np.nonzero(S)):
        if level[u] >= 0 and level[v] >= 0:
            g = gcd(g, int(level[u] + 1 - level[v]))
    return g


def connectivity(net):
    strong = is_strongly_connected(net)
    return Connectivity(strong, strong and period(net) == 1)


def is_connected(net):
    """Strict test: True iff some power of A has only positive entries."""
    return connectivity(net).primitive


def stationary_weights(net):
    """Unique probability vector rho with rho A = rho.

    Solved directly from (A^T - I) rho = 0 plus the normalization row, so
    periodic chains such as the directed circle are handled exactly.
    """
    if not is_strongly_connected(net):
        raise NotStronglyConnected("stationary weights need a strongly connected network")
    n = net.n
    M = np.vstack([net.A.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    rho, *_ = np.linalg.lstsq(M, b, rcond=None)
    rho = np.clip(rho, 0.0, None)
    return rho / rho.sum()


def make_complete(n):
    if n < 2:
        raise InvalidSize("complete network needs n >= 2")
    A = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(A, 0.0)
    return Network(A)


def make_directed_circle(n):
    """Player i listens only to player i+1 (mod n)."""
    if n < 2:
        raise InvalidSize("directed circle needs n >= 2")
    A = np.zeros((n, n))
    A[np.arange(n), (np.arange(n) + 1) % n] = 1.0
    return Network(A)


def make_star(n):
    """Player 0 is the hub listening uniformly to the n-1 spokes."""
    if n < 3:
        raise InvalidSize("star needs n >= 3")
    A = np.zeros((n, n))
    A[0, 1:] = 1.0 / (n - 1)
    A[1:, 0] = 1.0
    return Network(A)


def make_two_stars(n_per_star):
    """Two disconnected stars; hubs are players 0 and n_per_star."""
    if n_per_star < 3:
        raise InvalidSize("each star needs at least 3 players")
    S = make_star(n_per_star).A
    k = n_per_star
    A = np.zeros((2 * k, 2 * k))
    A[:k, :k] = S
    A[k:, k:] = S
    return Network(A)


GENERATORS = {
    "complete": make_complete,
    "directed_circle": make_directed_circle,
    "star": make_star,
    "two_stars": make_two_stars,
}


def make_network(name, n):
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise InvalidNetwork(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(n)


def random_network(n, rng, density=0.5):
    """Random strongly connected weighted network (used by tests and sweeps).

    A directed Hamiltonian cycle guarantees strong connectivity; extra edges
    are added with probability ``density`` and all weights are random.
    """
    rng = np.random.default_rng(rng)
    perm = rng.permutation(n)
    W = np.zeros((n, n))
    W[perm, np.roll(perm, -1)] = 1.0
    extra = rng.random((n, n)) < density
    np.fill_diagonal(extra, False)
    W = np.where(extra | (W > 0), rng.uniform(0.1, 1.0, (n, n)), 0.0)
    return Network.from_adjacency(W)
