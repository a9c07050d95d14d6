"""Deterministic interposer model: topology, link-disjoint routes, faults.

Time is counted in integer cycles. A message crossing a link pays the link's
base latency plus any delay the link's state adds; the state is sampled at
the cycle the message enters the link, which is what lets scheduled
(transient) faults expire between protocol rounds.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .chiplet import Chiplet, Role

MAX_PAYLOAD = 4096

Link = tuple[int, int]
Path = tuple[int, ...]


def link(a: int, b: int) -> Link:
    return (a, b) if a < b else (b, a)


def path_links(path: Sequence[int]) -> list[Link]:
    return [link(a, b) for a, b in zip(path, path[1:])]


@dataclass(frozen=True)
class Healthy:
    name = "healthy"


@dataclass(frozen=True)
class Dropping:
    name = "dropping"


@dataclass(frozen=True)
class Corrupting:
    bits: tuple[int, ...] = (0,)
    name = "corrupting"


@dataclass(frozen=True)
class Delaying:
    cycles: int = 1
    name = "delaying"


LinkState = Union[Healthy, Dropping, Corrupting, Delaying]
HEALTHY = Healthy()


def state_to_dict(state: LinkState) -> dict:
    out = {"state": state.name}
    if isinstance(state, Corrupting):
        out["bits"] = list(state.bits)
    elif isinstance(state, Delaying):
        out["cycles"] = state.cycles
    return out


def state_from_dict(doc: dict) -> LinkState:
    kind = doc.get("state")
    if kind == "healthy":
        return HEALTHY
    if kind == "dropping":
        return Dropping()
    if kind == "corrupting":
        return Corrupting(tuple(doc.get("bits", [0])))
    if kind == "delaying":
        return Delaying(int(doc.get("cycles", 1)))
    raise ValueError(f"unknown link state {kind!r}")


@dataclass(frozen=True)
class ScheduledFault:
    """``state`` holds on ``link`` for cycles in ``[from_cycle, to_cycle)``."""

    link: Link
    state: LinkState
    from_cycle: int = 0
    to_cycle: Optional[int] = None

    def active(self, cycle: int) -> bool:
        return self.from_cycle <= cycle and (self.to_cycle is None or cycle < self.to_cycle)


class MessageKind(enum.Enum):
    CHALLENGE = "challenge"
    RESPONSE = "response"
    SHARE = "share"
    VERDICT = "verdict"
    REPLAYED = "replayed"


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    kind: MessageKind
    payload: bytes
    session_id: int
    emit_cycle: int

    def __post_init__(self):
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError("payload exceeds 4 KiB")

    def to_dict(self) -> dict:
        return {"src": self.src, "dst": self.dst, "kind": self.kind.value,
                "payload": self.payload.hex(), "session_id": self.session_id,
                "emit_cycle": self.emit_cycle}

    @classmethod
    def from_dict(cls, doc: dict) -> "Message":
        return cls(int(doc["src"]), int(doc["dst"]), MessageKind(doc["kind"]),
                   bytes.fromhex(doc["payload"]), int(doc["session_id"]), int(doc["emit_cycle"]))


class Status(enum.Enum):
    DELIVERED = "delivered"
    DROPPED = "dropped"
    CORRUPTED = "corrupted"


@dataclass(frozen=True)
class Delivery:
    status: Status
    payload: Optional[bytes]
    arrival_cycle: Optional[int]
    path: Path

    @property
    def arrived(self) -> bool:
        return self.status is not Status.DROPPED


class RoutingError(LookupError):
    pass


class Topology:
    """Chiplets on an interposer graph with per-link fault state."""

    def __init__(self, chiplets: Iterable[Chiplet], edges: Iterable[tuple[int, int]],
                 link_latency: int = 1, max_routes: Optional[int] = None):
        self.chiplets: dict[int, Chiplet] = {}
        for c in chiplets:
            if c.id in self.chiplets:
                raise ValueError(f"duplicate chiplet id {c.id}")
            self.chiplets[c.id] = c
        self.links: dict[Link, LinkState] = {}
        for a, b in edges:
            if a == b or a not in self.chiplets or b not in self.chiplets:
                raise ValueError(f"bad edge ({a}, {b})")
            self.links[link(a, b)] = HEALTHY
        if link_latency < 1:
            raise ValueError("link latency must be >= 1 cycle")
        self.link_latency = link_latency
        self.max_routes = max_routes
        self.schedule: list[ScheduledFault] = []
        self._adj: dict[int, list[int]] = {n: [] for n in self.chiplets}
        for a, b in self.links:
            self._adj[a].append(b)
            self._adj[b].append(a)
        for nbrs in self._adj.values():
            nbrs.sort()
        self._routes: dict[tuple[int, int], list[Path]] = {}

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(self.chiplets)

    def by_role(self, role: Role) -> list[Chiplet]:
        return [c for _, c in sorted(self.chiplets.items()) if c.role is role]

    @property
    def integrators(self) -> list[Chiplet]:
        return self.by_role(Role.INTEGRATOR)

    @property
    def third_parties(self) -> list[Chiplet]:
        return self.by_role(Role.THIRD_PARTY)

    def neighbors(self, node: int) -> list[int]:
        return self._adj[node]

    def add_chiplet(self, chiplet: Chiplet, edges: Iterable[tuple[int, int]]):
        if chiplet.id in self.chiplets:
            raise ValueError(f"duplicate chiplet id {chiplet.id}")
        self.chiplets[chiplet.id] = chiplet
        self._adj[chiplet.id] = []
        for a, b in edges:
            if a not in self.chiplets or b not in self.chiplets or a == b:
                raise ValueError(f"bad edge ({a}, {b})")
            self.links[link(a, b)] = HEALTHY
            self._adj[a].append(b)
            self._adj[b].append(a)
            self._adj[a].sort()
            self._adj[b].sort()
        self._routes.clear()

    # -- routing -----------------------------------------------------------

    def _shortest(self, src: int, dst: int, banned: set[Link]) -> Optional[Path]:
        prev = {src: None}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            if u == dst:
                break
            for v in self._adj[u]:
                if v not in prev and link(u, v) not in banned:
                    prev[v] = u
                    queue.append(v)
        if dst not in prev:
            return None
        path = [dst]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        return tuple(reversed(path))

    def _compute_routes(self, a: int, b: int) -> list[Path]:
        banned: set[Link] = set()
        found = []
        while self.max_routes is None or len(found) < self.max_routes:
            p = self._shortest(a, b, banned)
            if p is None:
                break
            found.append(p)
            banned.update(path_links(p))
        return sorted(found, key=lambda p: (len(p), p))

    def routes(self, src: int, dst: int) -> list[Path]:
        """Link-disjoint paths from ``src`` to ``dst``, shortest first.

        The route set is computed once per unordered pair; the reverse
        direction uses the same paths reversed, so route ``i`` covers the same
        links both ways.
        """
        if src == dst:
            raise RoutingError("src and dst must differ")
        for n in (src, dst):
            if n not in self.chiplets:
                raise RoutingError(f"unknown chiplet {n}")
        key = (min(src, dst), max(src, dst))
        if key not in self._routes:
            self._routes[key] = self._compute_routes(*key)
        paths = self._routes[key]
        if not paths:
            raise RoutingError("unreachable")
        if src == key[0]:
            return list(paths)
        return [tuple(reversed(p)) for p in paths]

    def is_connected(self, healthy_only: bool = True) -> bool:
        if not self.chiplets:
            return True
        start = min(self.chiplets)
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if v in seen:
                    continue
                if healthy_only and not isinstance(self.link_state(link(u, v), 0), Healthy):
                    continue
                seen.add(v)
                queue.append(v)
        return len(seen) == len(self.chiplets)

    # -- faults ------------------------------------------------------------

    def _check_link(self, ln: tuple[int, int]) -> Link:
        ln = link(*ln)
        if ln not in self.links:
            raise KeyError(f"unknown link {ln}")
        return ln

    def inject_link_fault(self, ln: tuple[int, int], state: LinkState) -> LinkState:
        """Replace the link's standing state; returns the prior one for restoring."""
        ln = self._check_link(ln)
        prior = self.links[ln]
        self.links[ln] = state
        return prior

    def schedule_fault(self, ln: tuple[int, int], state: LinkState, from_cycle: int = 0,
                       to_cycle: Optional[int] = None):
        ln = self._check_link(ln)
        if to_cycle is not None and to_cycle <= from_cycle:
            raise ValueError("fault window must end after it starts")
        self.schedule.append(ScheduledFault(ln, state, from_cycle, to_cycle))

    def link_state(self, ln: Link, cycle: int) -> LinkState:
        # later schedule entries win over earlier ones and over the standing state
        for fault in reversed(self.schedule):
            if fault.link == ln and fault.active(cycle):
                return fault.state
        return self.links[ln]

    # -- delivery ----------------------------------------------------------

    def transmit(self, msg: Message, path_index: int = 0) -> Delivery:
        paths = self.routes(msg.src, msg.dst)
        if not 0 <= path_index < len(paths):
            raise RoutingError("no such route")
        path = paths[path_index]
        payload = bytearray(msg.payload)
        nbits = 8 * len(payload)
        corrupted = False
        cycle = msg.emit_cycle
        for ln in path_links(path):
            state = self.link_state(ln, cycle)
            if isinstance(state, Dropping):
                return Delivery(Status.DROPPED, None, None, path)
            if isinstance(state, Corrupting):
                # positions past the payload end have nothing to flip
                for pos in state.bits:
                    if pos < nbits:
                        payload[pos >> 3] ^= 0x80 >> (pos & 7)
                        corrupted = True
            elif isinstance(state, Delaying):
                cycle += state.cycles
            cycle += self.link_latency
        status = Status.CORRUPTED if corrupted and bytes(payload) != msg.payload else Status.DELIVERED
        return Delivery(status, bytes(payload), cycle, path)


# -- shipped topologies ------------------------------------------------------

def star_topology(chiplets: Sequence[Chiplet], **kw) -> Topology:
    """Every chiplet linked to every integrator."""
    hubs = [c.id for c in chiplets if c.role is Role.INTEGRATOR]
    edges = {link(h, c.id) for h in hubs for c in chiplets if c.id != h}
    return Topology(chiplets, sorted(edges), **kw)


def clique_topology(chiplets: Sequence[Chiplet], spokes: int = 2, **kw) -> Topology:
    """Fully connected integrators; each third-party chiplet spoked to ``spokes`` of them."""
    hubs = sorted(c.id for c in chiplets if c.role is Role.INTEGRATOR)
    edges = {link(a, b) for i, a in enumerate(hubs) for b in hubs[i + 1:]}
    others = sorted(c.id for c in chiplets if c.role is not Role.INTEGRATOR)
    for k, tp in enumerate(others):
        for j in range(min(spokes, len(hubs))):
            edges.add(link(tp, hubs[(k + j) % len(hubs)]))
    return Topology(chiplets, sorted(edges), **kw)


def mesh_topology(chiplets: Sequence[Chiplet], width: Optional[int] = None, **kw) -> Topology:
    """Row-major 2D grid in the given chiplet order."""
    ids = [c.id for c in chiplets]
    width = width or math.ceil(math.sqrt(len(ids)))
    edges = set()
    for pos, node in enumerate(ids):
        row, col = divmod(pos, width)
        if col + 1 < width and pos + 1 < len(ids):
            edges.add(link(node, ids[pos + 1]))
        if pos + width < len(ids):
            edges.add(link(node, ids[pos + width]))
    return Topology(chiplets, sorted(edges), **kw)


TOPOLOGY_BUILDERS = {"star": star_topology, "clique": clique_topology, "mesh": mesh_topology}
