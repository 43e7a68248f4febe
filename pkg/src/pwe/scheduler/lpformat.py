"""CPLEX-LP text export of a :class:`MilpModel`."""

from __future__ import annotations

import re

from .model import EQ, GE, LE, MilpModel


def var_label(name: tuple) -> str:
    raw = "_".join(str(p) for p in name)
    return re.sub(r"[^A-Za-z0-9_.]", "_", raw)


def _terms(coefs, labels) -> str:
    parts = []
    for i, c in coefs:
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        coef = "" if mag == 1 else f"{mag:g} "
        parts.append(f"{sign} {coef}{labels[i]}")
    text = " ".join(parts) or "0 " + labels[0]
    return text[2:] if text.startswith("+ ") else text


def to_lp(model: MilpModel) -> str:
    labels = [f"{var_label(v.name)}_{k}" for k, v in enumerate(model.variables)]
    lines = ["\\ consistent update model", "Minimize", " obj: " + _terms(sorted(model.objective.items()), labels),
             "Subject To"]
    sense = {LE: "<=", GE: ">=", EQ: "="}
    for k, r in enumerate(model.rows):
        lines.append(f" {r.family}_{k}: {_terms(r.coefs, labels)} {sense[r.sense]} {r.rhs:g}")
    lines.append("Bounds")
    for lab, v in zip(labels, model.variables):
        lines.append(f" {v.lb:g} <= {lab} <= {v.ub:g}")
    ints = [lab for lab, v in zip(labels, model.variables) if v.integer]
    if ints:
        lines.append("General")
        for i in range(0, len(ints), 8):
            lines.append(" " + " ".join(ints[i:i + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"
