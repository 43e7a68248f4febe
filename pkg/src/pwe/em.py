"""EM functions, per-tile codebooks, the mode merge rule and tile forwarding.

A function is identified by a descriptor string that doubles as its codebook
key::

    specular
    absorb                  absorb from every port
    absorb:<in>
    steer:<in>><out>
    split:<in>><out1>,<out2>
    phase:<in>><out>@<radians>
    polarize:<in>><out>

Port ids are the ids of the neighbouring graph nodes, so node ids must not
contain any of ``> , | @``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import EmptyFunctionList, EmError, MismatchedCellCount, UnknownFunction, UnknownPort

STEER = "steer"
SPLIT = "split"
ABSORB = "absorb"
SPECULAR = "specular"
PHASE_SHIFT = "phase"
POLARIZE = "polarize"
TEMPLATES = (STEER, SPLIT, ABSORB, SPECULAR, PHASE_SHIFT, POLARIZE)
ROUTING_TEMPLATES = (STEER, SPLIT, PHASE_SHIFT, POLARIZE)

UNINTENDED_FRACTION = 0.25
RESERVED_ID_CHARS = set(">,|@")


@dataclass(frozen=True)
class Port:
    port_id: str
    direction: tuple
    kind: str  # "tile_link" | "user_link"
    distance: float = 0.0


@dataclass(frozen=True)
class EmFunction:
    function_id: str
    template: str
    in_port: str | None = None
    out_ports: tuple = ()
    bias: tuple = ()
    efficiency: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.template not in TEMPLATES:
            raise EmError(f"unknown template {self.template!r}")
        if not 0.0 < self.efficiency <= 1.0:
            raise EmError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if self.template == SPECULAR and self.bias:
            raise EmError("specular functions carry no bias vector")
        if self.in_port is not None and self.in_port in self.out_ports:
            raise EmError(f"{self.function_id}: output port equals input port")
        object.__setattr__(self, "bias", tuple(int(b) for b in self.bias))
        object.__setattr__(self, "out_ports", tuple(self.out_ports))


def describe(template: str, in_port: str | None = None, out_ports: Iterable[str] = (), phase: float = 0.0) -> str:
    outs = list(out_ports)
    if template == SPECULAR:
        return SPECULAR
    if template == ABSORB:
        return ABSORB if in_port is None else f"{ABSORB}:{in_port}"
    head = f"{template}:{in_port}>{','.join(outs)}"
    if template == PHASE_SHIFT:
        head += f"@{phase!r}"
    return head


def parse_descriptor(descriptor: str) -> tuple[str, str | None, tuple, float]:
    """Split a function descriptor into ``(template, in_port, out_ports, phase)``."""
    if descriptor == SPECULAR:
        return SPECULAR, None, (), 0.0
    if descriptor == ABSORB:
        return ABSORB, None, (), 0.0
    template, sep, rest = descriptor.partition(":")
    if not sep or template not in TEMPLATES:
        raise UnknownFunction(descriptor)
    if template == ABSORB:
        return ABSORB, rest, (), 0.0
    phase = 0.0
    if template == PHASE_SHIFT:
        rest, _, ph = rest.partition("@")
        try:
            phase = float(ph)
        except ValueError as exc:
            raise UnknownFunction(descriptor) from exc
    src, arrow, outs = rest.partition(">")
    if not arrow or not src or not outs:
        raise UnknownFunction(descriptor)
    out_ports = tuple(outs.split(","))
    if template != SPLIT and len(out_ports) != 1:
        raise UnknownFunction(descriptor)
    return template, src, out_ports, phase


# ---------------------------------------------------------------- bias synthesis

def quantized_phase_profile(in_prop: np.ndarray, out_dir: np.ndarray, u_hat: np.ndarray, v_hat: np.ndarray,
                            side: float, rows: int, cols: int, levels: int, wavelength: float,
                            offset: float = 0.0) -> tuple:
    """Cell states realising anomalous reflection from ``in_prop`` to ``out_dir``.

    The required phase gradient is ``k (t_in - t_out)`` where ``t`` are the
    tangential components of the incident propagation vector and of the
    departure vector; the continuous profile is quantised to ``levels``
    states.
    """
    k = 2 * math.pi / wavelength
    grad = k * np.array([(in_prop - out_dir) @ u_hat, (in_prop - out_dir) @ v_hat])
    xs = (np.arange(rows) + 0.5) / rows * side
    ys = (np.arange(cols) + 0.5) / cols * side
    phi = grad[0] * xs[:, None] + grad[1] * ys[None, :] + offset
    states = np.floor(np.mod(phi, 2 * math.pi) / (2 * math.pi) * levels).astype(int) % levels
    return tuple(int(s) for s in states.ravel())


# ---------------------------------------------------------------- codebook

@dataclass(frozen=True)
class Codebook:
    """Function id -> EmFunction, optionally backed by an on-demand synthesiser.

    ``synthesizer(function_id)`` returns an :class:`EmFunction` or ``None``;
    it must be deterministic so that lookups stay pure.
    """

    cell_count: int
    entries: dict = field(default_factory=dict)
    synthesizer: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for fid, fn in self.entries.items():
            if fid != fn.function_id:
                raise EmError(f"codebook key {fid!r} does not match function id {fn.function_id!r}")
            if fn.template != SPECULAR and len(fn.bias) != self.cell_count:
                raise MismatchedCellCount(f"{fid}: {len(fn.bias)} cells, codebook has {self.cell_count}")

    def __contains__(self, function_id: str) -> bool:
        try:
            codebook_lookup(self, function_id)
        except UnknownFunction:
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "cell_count": self.cell_count,
            "entries": [
                {
                    "function_id": f.function_id,
                    "template": f.template,
                    "in_port": f.in_port,
                    "out_ports": list(f.out_ports),
                    "bias": list(f.bias),
                    "efficiency": f.efficiency,
                    "phase": f.phase,
                }
                for f in sorted(self.entries.values(), key=lambda f: f.function_id)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Codebook":
        entries = {}
        for e in data["entries"]:
            fn = EmFunction(e["function_id"], e["template"], e.get("in_port"), tuple(e.get("out_ports", ())),
                            tuple(e.get("bias", ())), float(e["efficiency"]), float(e.get("phase", 0.0)))
            entries[fn.function_id] = fn
        return cls(int(data["cell_count"]), entries)

    @classmethod
    def loads(cls, text: str) -> "Codebook":
        return cls.from_dict(json.loads(text))


def codebook_lookup(codebook: Codebook, function_id: str) -> EmFunction:
    fn = codebook.entries.get(function_id)
    if fn is not None:
        return fn
    if codebook.synthesizer is not None:
        fn = codebook.synthesizer(function_id)
        if fn is not None:
            return fn
    raise UnknownFunction(function_id)


# ---------------------------------------------------------------- merging

@dataclass(frozen=True, eq=False)
class MergedFunction:
    constituents: tuple
    merged_bias: tuple
    per_constituent_efficiency: dict

    @property
    def constituent_ids(self) -> tuple:
        return tuple(f.function_id for f in self.constituents)

    @property
    def key(self) -> tuple:
        return tuple(sorted(self.constituent_ids))

    @property
    def descriptor(self) -> str:
        return "|".join(self.key)

    def __eq__(self, other):
        if not isinstance(other, MergedFunction):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __len__(self):
        return len(self.constituents)


def _mode_low(values) -> int:
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def overlap_efficiency(fn: EmFunction, merged_bias: tuple) -> float:
    """Efficiency left to ``fn`` after merging: base efficiency times cell overlap."""
    if not fn.bias:
        return fn.efficiency
    agree = sum(1 for a, b in zip(fn.bias, merged_bias) if a == b)
    if agree == len(fn.bias):
        return fn.efficiency
    return fn.efficiency * (agree / len(fn.bias))


def merge(functions: Iterable[EmFunction]) -> MergedFunction:
    """Combine functions by taking the per-cell mode of their bias vectors.

    Duplicate ids collapse, ties go to the smallest cell state, and the
    result does not depend on argument order.
    """
    unique = {f.function_id: f for f in functions}
    if not unique:
        raise EmptyFunctionList("merge needs at least one function")
    fns = tuple(unique[k] for k in sorted(unique))
    biased = [f for f in fns if f.bias]
    lengths = {len(f.bias) for f in biased}
    if len(lengths) > 1:
        raise MismatchedCellCount(f"cell counts differ: {sorted(lengths)}")
    if biased:
        n = lengths.pop()
        merged = tuple(_mode_low([f.bias[i] for f in biased]) for i in range(n))
    else:
        merged = ()
    eff = {f.function_id: overlap_efficiency(f, merged) for f in fns}
    return MergedFunction(fns, merged, eff)


# ---------------------------------------------------------------- forwarding

def forward_detail(tile, active: MergedFunction | None, in_port: str,
                   unintended_fraction: float = UNINTENDED_FRACTION) -> tuple[dict, bool]:
    """Leaky-multicast response of ``tile`` to a wave entering through ``in_port``.

    ``tile`` must provide ``ports`` (mapping id -> Port), ``specular_partners``,
    ``specular_efficiency`` and ``collimating``. Returns the output power
    fractions and whether the redirection was a collimated (configured)
    one. ``active=None`` is the deactivated state: natural specular
    reflection.
    """
    if in_port not in tile.ports:
        raise UnknownPort(in_port)
    partners = tile.specular_partners(in_port)

    def mirror(out, frac):
        # a mirror bounce is shared evenly by every partner port
        for q in partners:
            out[q] = out.get(q, 0.0) + frac / len(partners)

    if active is None:
        out = {}
        mirror(out, tile.specular_efficiency)
        return out, False
    out: dict = {}
    matched = False
    routed = False
    for fn in active.constituents:
        eff = active.per_constituent_efficiency[fn.function_id]
        t = fn.template
        if t == SPECULAR:
            mirror(out, eff)
            matched = True
        elif t == ABSORB:
            if fn.in_port is None or fn.in_port == in_port:
                matched = True
        elif fn.in_port == in_port:
            matched = routed = True
            share = eff / len(fn.out_ports)
            for p in fn.out_ports:
                if p in tile.ports:
                    out[p] = out.get(p, 0.0) + share
    if not matched:
        mirror(out, unintended_fraction)
    total = sum(out.values())
    if total > 1.0:
        out = {k: v / total for k, v in out.items()}
    return out, routed and bool(tile.collimating)


def specular_fraction(tile, active: MergedFunction | None, in_port: str,
                      unintended_fraction: float = UNINTENDED_FRACTION) -> float:
    """Share of a wave from ``in_port`` that leaves as a mirror reflection."""
    if active is None:
        return tile.specular_efficiency
    frac = 0.0
    matched = False
    for fn in active.constituents:
        if fn.template == SPECULAR:
            frac += active.per_constituent_efficiency[fn.function_id]
            matched = True
        elif fn.template == ABSORB:
            matched = matched or fn.in_port is None or fn.in_port == in_port
        elif fn.in_port == in_port:
            matched = True
    return min(frac, 1.0) if matched else unintended_fraction


def forward(tile, active: MergedFunction | None, in_port: str,
            unintended_fraction: float = UNINTENDED_FRACTION) -> dict:
    return forward_detail(tile, active, in_port, unintended_fraction)[0]
