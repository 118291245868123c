"""Statistics computed from event logs.

Every function here reads only the log. Who owned what at the start is taken
from each device's first POWER_ON record, whose ``owned`` field lists the
collection the device walked in with. An EXCHANGE record is always read from
the receiving side: the record's device received ``received_picture`` from
``partner``.
"""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Mapping

import networkx as nx

from .core import DeviceId, EventKind, EventRecord, PictureId, format_time

Inventory = Mapping[DeviceId, Iterable[PictureId]]


class UnknownPictureError(KeyError):
    pass


class UnknownDeviceError(KeyError):
    pass


def initial_inventory(log: Iterable[EventRecord]) -> dict[DeviceId, frozenset[PictureId]]:
    """Collections at each device's first power-on."""
    out: dict[DeviceId, frozenset[PictureId]] = {}
    for r in log:
        if r.kind is EventKind.POWER_ON and r.device not in out:
            out[r.device] = frozenset(r.get_ints("owned"))
    return out


@dataclass(frozen=True)
class Delivery:
    time_ms: int
    sender: DeviceId
    receiver: DeviceId
    picture: PictureId


def deliveries(log: Iterable[EventRecord]) -> list[Delivery]:
    return [
        Delivery(r.time_ms, r.get_int("partner"), r.device, r.get_int("received_picture"))
        for r in log if r.kind is EventKind.EXCHANGE
    ]


def _universe(log: list[EventRecord], pictures: Iterable[PictureId] | None) -> list[PictureId]:
    if pictures is not None:
        return sorted(set(pictures))
    seen = set()
    for inv in initial_inventory(log).values():
        seen |= inv
    seen.update(d.picture for d in deliveries(log))
    return sorted(seen)


# ---------------------------------------------------------------------------
# per-picture counts


@dataclass(frozen=True)
class PictureStats:
    picture: PictureId
    times_exchanged: int
    distinct_recipients: int

    def line(self) -> str:
        return f"{self.picture:02d}: {self.times_exchanged}, {self.distinct_recipients}"


def picture_stats(log: list[EventRecord], pictures: Iterable[PictureId] | None = None) -> list[PictureStats]:
    """Deliveries and distinct non-owner recipients per picture, ascending by id.

    ``pictures`` fixes the set of rows (normally the scenario's pictures);
    otherwise every picture seen in the log gets one.
    """
    owners: dict[PictureId, set[DeviceId]] = defaultdict(set)
    for d, inv in initial_inventory(log).items():
        for p in inv:
            owners[p].add(d)
    times: Counter = Counter()
    recipients: dict[PictureId, set[DeviceId]] = defaultdict(set)
    for dl in deliveries(log):
        times[dl.picture] += 1
        if dl.receiver not in owners[dl.picture]:
            recipients[dl.picture].add(dl.receiver)
    return [PictureStats(p, times[p], len(recipients[p])) for p in _universe(log, pictures)]


def format_stats(stats: Iterable[PictureStats]) -> str:
    return "".join(s.line() + "\n" for s in stats)


# ---------------------------------------------------------------------------
# sender x picture heatmap


@dataclass
class ShareMatrix:
    senders: list[DeviceId]
    pictures: list[PictureId]
    cells: dict[tuple[DeviceId, PictureId], int] = field(default_factory=dict)

    def __getitem__(self, key: tuple[DeviceId, PictureId]) -> int:
        return self.cells.get(key, 0)

    def row(self, sender: DeviceId) -> list[int]:
        return [self[sender, p] for p in self.pictures]

    def column_totals(self) -> dict[PictureId, int]:
        return {p: sum(self[s, p] for s in self.senders) for p in self.pictures}

    def total(self) -> int:
        return sum(self.cells.values())

    def to_tsv(self) -> str:
        lines = ["sender\t" + "\t".join(str(p) for p in self.pictures)]
        for s in self.senders:
            lines.append(f"{s}\t" + "\t".join(str(c) for c in self.row(s)))
        return "\n".join(lines) + "\n"


def parse_tsv_matrix(text: str) -> ShareMatrix:
    rows = [ln.split("\t") for ln in text.splitlines() if ln]
    pictures = [int(x) for x in rows[0][1:] if x]
    m = ShareMatrix([], pictures)
    for row in rows[1:]:
        s = int(row[0])
        m.senders.append(s)
        for p, c in zip(pictures, row[1:]):
            if int(c):
                m.cells[s, p] = int(c)
    return m


def share_heatmap(
    log: list[EventRecord],
    senders: Iterable[DeviceId] | None = None,
    pictures: Iterable[PictureId] | None = None,
) -> ShareMatrix:
    """How often each device sent each picture. Axes ascend by id."""
    cells: Counter = Counter()
    for dl in deliveries(log):
        cells[dl.sender, dl.picture] += 1
    if senders is None:
        found = {r.device for r in log} | {s for s, _ in cells}
        senders = found
    return ShareMatrix(sorted(set(senders)), _universe(log, pictures), dict(cells))


def repetition_index(log: list[EventRecord]) -> dict[tuple[DeviceId, PictureId], float]:
    """Share of repeat sends per (sender, picture): (n - 1) / n for n sends."""
    sends = Counter((dl.sender, dl.picture) for dl in deliveries(log))
    return {k: (n - 1) / n for k, n in sorted(sends.items())}


def format_repetition(index: Mapping[tuple[DeviceId, PictureId], float]) -> str:
    lines = ["sender\tpicture\tindex"]
    lines += [f"{s}\t{p}\t{v:.3f}" for (s, p), v in sorted(index.items())]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# diffusion graphs


class EdgeClass(enum.Enum):
    INITIAL_SPREAD = "INITIAL_SPREAD"
    RE_RECEIVE = "RE_RECEIVE"


@dataclass(frozen=True)
class DiffusionEdge:
    sender: DeviceId
    receiver: DeviceId
    time_ms: int
    cls: EdgeClass


@dataclass(frozen=True)
class DiffusionGraph:
    picture: PictureId
    initial_owner: DeviceId | None
    edges: tuple[DiffusionEdge, ...] = ()

    def to_networkx(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph(picture=self.picture)
        if self.initial_owner is not None:
            g.graph["initial_owner"] = self.initial_owner
        nodes = {e.sender for e in self.edges} | {e.receiver for e in self.edges}
        if self.initial_owner is not None:
            nodes.add(self.initial_owner)
        for n in sorted(nodes):
            g.add_node(n, owner=(n == self.initial_owner))
        for i, e in enumerate(self.edges):
            g.add_edge(e.sender, e.receiver, key=i, time_ms=e.time_ms, cls=e.cls.value)
        return g


def diffusion_graph(log: list[EventRecord], picture: PictureId, inventory: Inventory | None = None) -> DiffusionGraph:
    """Every delivery of ``picture`` in log order, split into first arrivals and re-receives.

    A delivery is INITIAL_SPREAD when the receiver had not held the picture at
    any earlier instant. Deliveries in the same instant do not see each other.
    """
    inv = initial_inventory(log) if inventory is None else {d: frozenset(p) for d, p in inventory.items()}
    ds = [dl for dl in deliveries(log) if dl.picture == picture]
    holders = {d for d, pics in inv.items() if picture in pics}
    if not holders and not ds:
        raise UnknownPictureError(picture)
    owner = min(holders) if holders else None
    edges = []
    for _, same_time in groupby(ds, key=lambda dl: dl.time_ms):
        batch = list(same_time)
        for dl in batch:
            cls = EdgeClass.RE_RECEIVE if dl.receiver in holders else EdgeClass.INITIAL_SPREAD
            edges.append(DiffusionEdge(dl.sender, dl.receiver, dl.time_ms, cls))
        holders.update(dl.receiver for dl in batch)
    return DiffusionGraph(picture, owner, tuple(edges))


def export_graph(g: DiffusionGraph) -> str:
    """GraphML text. Nodes carry ``owner``; edges carry ``time_ms`` and ``cls``."""
    return "\n".join(nx.generate_graphml(g.to_networkx())) + "\n"


def parse_graph(text: str) -> DiffusionGraph:
    h = nx.parse_graphml(text, node_type=int, force_multigraph=True)
    edges = sorted(
        ((int(k), DiffusionEdge(u, v, int(d["time_ms"]), EdgeClass(d["cls"])))
         for u, v, k, d in h.edges(keys=True, data=True)),
        key=lambda x: x[0],
    )
    owner = h.graph.get("initial_owner")
    return DiffusionGraph(int(h.graph["picture"]), None if owner is None else int(owner),
                          tuple(e for _, e in edges))


# ---------------------------------------------------------------------------
# collection history


def collection_timeline(log: list[EventRecord], device: DeviceId) -> list[tuple[int, PictureId, str]]:
    """(time, picture, NEW or DUPLICATE) for each delivery to ``device``."""
    if not any(r.device == device for r in log):
        raise UnknownDeviceError(device)
    have = set(initial_inventory(log).get(device, ()))
    out = []
    for dl in deliveries(log):
        if dl.receiver != device:
            continue
        out.append((dl.time_ms, dl.picture, "DUPLICATE" if dl.picture in have else "NEW"))
        have.add(dl.picture)
    return out


def format_timeline(rows: Iterable[tuple[int, PictureId, str]]) -> str:
    return "".join(f"{format_time(t)}\t{p}\t{tag}\n" for t, p, tag in rows)
