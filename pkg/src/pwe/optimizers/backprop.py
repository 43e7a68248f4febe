"""Back-propagating configuration: walls become layers, tiles become neurons.

The network is trained on nonnegative power-split weights ``theta`` that are
masked by normalised link gains; each trained neuron is then mapped to the
codebook function whose port profile is closest in direction to its
outgoing weights.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import em
from ..channel import ChannelParams
from ..errors import EmptyWallRoute
from ..graph import Configuration, PweGraph


class NonConvergence(UserWarning):
    pass


@dataclass(frozen=True)
class TrainingParams:
    learning_rate: float = 0.5
    epochs: int = 2000
    tolerance: float = 1e-6
    seed: int = 0


def relu(x):
    return np.maximum(x, 0.0)


def forward_pass(weights, x0):
    """Activations of every layer; hidden and output layers use ReLU."""
    acts, pre = [np.asarray(x0, dtype=float)], []
    for w in weights:
        z = w @ acts[-1]
        pre.append(z)
        acts.append(relu(z))
    return acts, pre


def loss_and_grad(weights, x0, target):
    """Squared-error loss and its gradient with respect to every weight matrix."""
    acts, pre = forward_pass(weights, x0)
    err = acts[-1] - np.asarray(target, dtype=float)
    loss = float(err @ err)
    grads = [None] * len(weights)
    delta = 2 * err * (pre[-1] > 0)
    for i in range(len(weights) - 1, -1, -1):
        grads[i] = np.outer(delta, acts[i])
        if i:
            delta = (weights[i].T @ delta) * (pre[i - 1] > 0)
    return loss, grads


def numeric_grad(weights, x0, target, h=1e-6):
    out = []
    for i, w in enumerate(weights):
        g = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            plus = [m.copy() for m in weights]
            minus = [m.copy() for m in weights]
            plus[i][idx] += h
            minus[i][idx] -= h
            g[idx] = (loss_and_grad(plus, x0, target)[0] - loss_and_grad(minus, x0, target)[0]) / (2 * h)
        out.append(g)
    return out


def wall_route(graph: PweGraph, tx: str, rx: str) -> list:
    """Coarse route over surfaces (fewest walls, then ids) from tx to rx."""
    surf = {t: graph.tiles[t].placement.surface_id for t in graph.tiles}
    start = {surf[t] for t in graph.first_contact_tiles(tx)}
    goal = {surf[t] for t in graph.first_contact_tiles(rx)}
    nbrs: dict = {}
    for lk in graph.links.values():
        if lk.a in surf and lk.b in surf:
            nbrs.setdefault(surf[lk.a], set()).add(surf[lk.b])
            nbrs.setdefault(surf[lk.b], set()).add(surf[lk.a])
    heap = [(1, s, (s,)) for s in sorted(start)]
    seen = set()
    while heap:
        d, s, path = heapq.heappop(heap)
        if s in seen:
            continue
        seen.add(s)
        if s in goal:
            return list(path)
        for n in sorted(nbrs.get(s, ())):
            if n not in seen:
                heapq.heappush(heap, (d + 1, n, path + (n,)))
    raise EmptyWallRoute(f"no wall route from {tx} to {rx}")


@dataclass
class BackpropResult:
    configuration: Configuration
    layers: list
    theta: list
    gains: list
    loss: float
    converged: bool
    history: list = field(default_factory=list)


def _gain_matrix(graph: PweGraph, srcs, dsts, params: ChannelParams) -> np.ndarray:
    g = np.zeros((len(dsts), len(srcs)))
    for j, d in enumerate(dsts):
        for i, s in enumerate(srcs):
            lid = graph.adjacency[s].get(d)
            if lid is not None:
                lk = graph.links[lid]
                g[j, i] = lk.nlos_factor / lk.length ** params.a_far
    m = g.max()
    return g / m if m > 0 else g


def backprop_configure(graph: PweGraph, tx: str, rx_ids, walls, target, training: TrainingParams = TrainingParams(),
                       params: ChannelParams = ChannelParams()) -> BackpropResult:
    """Train split weights across ``walls`` so the receivers see ``target``.

    Layer 0 is the transmitter, layer ``i`` holds the tiles of ``walls[i-1]``
    and the output layer holds ``rx_ids``. The transmitter's fan-out is fixed;
    tile weights stay nonnegative with every column summing to at most 1.
    """
    walls = list(walls)
    if not walls:
        raise EmptyWallRoute("wall route is empty")
    rx_ids = list(rx_ids)
    layers = [[tx]]
    for w in walls:
        tiles = sorted(t for t in graph.tiles if graph.tiles[t].placement.surface_id == w)
        if not tiles:
            raise EmptyWallRoute(f"wall {w!r} carries no tiles")
        layers.append(tiles)
    layers.append(rx_ids)
    gains = [_gain_matrix(graph, a, b, params) for a, b in zip(layers, layers[1:])]
    rng = np.random.default_rng(training.seed)
    theta = [np.ones_like(gains[0])] + [rng.uniform(0.5, 1.0, g.shape) for g in gains[1:]]
    theta = [_project(t) if i else t for i, t in enumerate(theta)]
    target = np.asarray(target, dtype=float)
    x0 = np.ones(1)
    history = []
    best = (np.inf, [t.copy() for t in theta])
    for _ in range(training.epochs):
        w = [t * g for t, g in zip(theta, gains)]
        loss, grads = loss_and_grad(w, x0, target)
        history.append(loss)
        if loss < best[0]:
            best = (loss, [t.copy() for t in theta])
        if loss <= training.tolerance:
            break
        for i in range(1, len(theta)):
            theta[i] = _project(theta[i] - training.learning_rate * grads[i] * gains[i])
    loss, theta = best
    converged = loss <= training.tolerance
    if not converged:
        warnings.warn(f"backprop stopped at loss {loss:.3g} above tolerance {training.tolerance:g}",
                      NonConvergence, stacklevel=2)
    config = _map_to_codebook(graph, layers, theta, gains)
    return BackpropResult(config, layers, theta, gains, loss, converged, history)


def _project(t: np.ndarray) -> np.ndarray:
    t = np.maximum(t, 0.0)
    s = t.sum(axis=0)
    return t / np.where(s > 1.0, s, 1.0)


def _map_to_codebook(graph: PweGraph, layers, theta, gains) -> Configuration:
    w = [t * g for t, g in zip(theta, gains)]
    acts, _ = forward_pass(w, np.ones(1))
    assignment = {}
    for li in range(1, len(layers) - 1):
        prev, here, nxt = layers[li - 1], layers[li], layers[li + 1]
        incoming = w[li - 1] * acts[li - 1][None, :]
        for j, tile in enumerate(here):
            out_w = w[li][:, j]
            if acts[li][j] <= 0 or out_w.max() <= 0:
                continue
            src = prev[int(np.argmax(incoming[j]))]
            best, best_cos = None, -1.0
            for k, dst in enumerate(nxt):
                if dst not in graph.tiles[tile].ports or src not in graph.tiles[tile].ports:
                    continue
                fn = graph.function(tile, f"steer:{src}>{dst}")
                profile = np.zeros(len(nxt))
                profile[k] = fn.efficiency
                cos = float(out_w @ profile / (np.linalg.norm(out_w) * np.linalg.norm(profile)))
                if cos > best_cos + 1e-12:
                    best, best_cos = fn, cos
            if best is not None:
                assignment[tile] = em.merge([best])
    return Configuration(assignment)
