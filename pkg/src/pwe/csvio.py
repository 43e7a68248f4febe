"""CSV emitters. Every table has a header row and a fixed column order."""

from __future__ import annotations

import csv
import io

from .channel import fmt, pdp_csv
from .graph import Configuration, PweGraph

NODE_COLUMNS = ("node_id", "kind", "x_m", "y_m", "z_m", "normal_x", "normal_y", "normal_z", "surface_id", "coated")
LINK_COLUMNS = ("link_id", "a", "b", "length_m", "nlos_factor", "kind")
CONFIG_COLUMNS = ("tile_id", "function")
SCHEDULE_COLUMNS = ("round", "tile_id", "function")

__all__ = ["NODE_COLUMNS", "LINK_COLUMNS", "CONFIG_COLUMNS", "SCHEDULE_COLUMNS", "table", "nodes_csv",
           "links_csv", "configuration_csv", "schedule_csv", "pdp_csv", "read_table"]


def table(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def read_table(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def nodes_csv(graph: PweGraph) -> str:
    rows = []
    for tid in sorted(graph.tiles):
        t = graph.tiles[tid]
        rows.append((tid, "tile", *map(fmt, t.center), *map(fmt, t.normal), t.placement.surface_id,
                     int(t.placement.coated)))
    for uid in sorted(graph.users):
        rows.append((uid, "user", *map(fmt, graph.position(uid)), "", "", "", "", ""))
    return table(NODE_COLUMNS, rows)


def links_csv(graph: PweGraph) -> str:
    rows = [(lk.link_id, lk.a, lk.b, fmt(lk.length), fmt(lk.nlos_factor), lk.kind)
            for lk in sorted(graph.links.values(), key=lambda lk: lk.link_id)]
    return table(LINK_COLUMNS, rows)


def configuration_csv(graph: PweGraph, config: Configuration, include_off: bool = False) -> str:
    rows = [r for r in config.to_rows(graph.tiles) if include_off or r[1] != "off"]
    return table(CONFIG_COLUMNS, rows)


def schedule_csv(schedule) -> str:
    """One row per tile change; rounds are numbered from 1."""
    rows = []
    for t, changes in enumerate(schedule.rounds, start=1):
        rows += [(t, u, d) for u, d in sorted(changes)]
    return table(SCHEDULE_COLUMNS, rows)
