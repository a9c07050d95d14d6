"""Scenario files: parsing, validation with line-anchored diagnostics, building.

A scenario is one JSON document::

    {
      "schema": 1,
      "name": "cva6",
      "seed": 7,
      "topology": {
        "kind": "star" | "mesh" | "clique" | "custom",
        "nodes": [{"id": 1, "role": "integrator"},
                  {"id": 10, "role": "third_party", "behavior": "counterfeit"}],
        "edges": [[1, 10], ...],            # kind == "custom" only
        "link_latency": 1,
        "coverage": true,                   # require >= 2 disjoint routes per pair
        "faults": [{"link": [1, 10], "state": "corrupting", "bits": [0],
                    "from_cycle": 0, "to_cycle": null}]
      },
      "protocol": {"quorum": "auto" | {"t": 3}, "signature_length_bits": 256,
                   "fanout": 2, "clock_ghz": 1.0, "hash_cycles": 96},
      "attacks": [{"type": "bit_flip", "k": 1, "trials": 1000}]
    }
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

from .chiplet import CHALLENGE_BYTES, Behavior, Chiplet, Manifest, Role, derive_secret, puf_response
from .crypto import Digest256, SessionContext, session_digest
from .interposer import TOPOLOGY_BUILDERS, Topology, state_from_dict
from .protocol import AuthenTree, ProtocolConfig, authenticate_sip
from .sharing import SharingError, SharingPolicy

SCHEMA_VERSION = 1
ATTACK_TYPES = ("bit_flip", "share_removal", "replay", "clone", "silent")


class ConfigError(ValueError):
    def __init__(self, diagnostics: list["Diagnostic"]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass
class Diagnostic:
    field: str
    message: str
    line: Optional[int] = None

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.field}: {self.message}"


def _line_of(text: str, pattern: str, occurrence: int = 0) -> Optional[int]:
    hits = [m.start() for m in re.finditer(pattern, text)]
    if len(hits) <= occurrence:
        return None
    return text.count("\n", 0, hits[occurrence]) + 1


def _key_line(text: str, key: str) -> Optional[int]:
    return _line_of(text, rf'"{re.escape(key)}"\s*:')


def validate(doc: Any, text: str = "") -> list[Diagnostic]:
    """Check schema and scenario invariants; an empty list means valid."""
    diags: list[Diagnostic] = []

    def err(fieldname, message, line=None):
        diags.append(Diagnostic(fieldname, message, line or _key_line(text, fieldname.split(".")[-1].split("[")[0])))

    if not isinstance(doc, dict):
        return [Diagnostic("<root>", "scenario must be a JSON object", 1)]
    if doc.get("schema") != SCHEMA_VERSION:
        err("schema", f"expected schema {SCHEMA_VERSION}, got {doc.get('schema')!r}")
    seed = doc.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        err("seed", "seed must be present and a 64-bit unsigned integer")

    topo = doc.get("topology")
    if not isinstance(topo, dict):
        err("topology", "missing topology section")
        return diags
    kind = topo.get("kind", "custom")
    if kind not in (*TOPOLOGY_BUILDERS, "custom"):
        err("topology.kind", f"unknown topology kind {kind!r}")
    nodes = topo.get("nodes")
    ids: list[int] = []
    roles: dict[int, str] = {}
    if not isinstance(nodes, list) or not nodes:
        err("topology.nodes", "nodes must be a non-empty list")
        nodes = []
    seen: dict[int, int] = {}
    for i, node in enumerate(nodes):
        if not isinstance(node, dict) or not isinstance(node.get("id"), int):
            err(f"topology.nodes[{i}].id", "node needs an integer id")
            continue
        nid = node["id"]
        if not 0 <= nid < 2**64:
            err(f"topology.nodes[{i}].id", f"id {nid} does not fit in 64 bits")
        if nid in seen:
            line = _line_of(text, rf'"id"\s*:\s*{nid}\b', seen[nid])
            err(f"topology.nodes[{i}].id", f"duplicate chiplet id {nid}", line)
        seen[nid] = seen.get(nid, 0) + 1
        ids.append(nid)
        role = node.get("role")
        if role not in ("integrator", "third_party"):
            err(f"topology.nodes[{i}].role", f"role must be 'integrator' or 'third_party', got {role!r}")
        roles[nid] = role
        behavior = node.get("behavior", "honest")
        if behavior not in {b.value for b in Behavior}:
            err(f"topology.nodes[{i}].behavior", f"unknown behavior {behavior!r}")
    n_int = sum(r == "integrator" for r in roles.values())
    if n_int < 3:
        err("topology.nodes", f"need at least 3 integrators, found {n_int}")

    edges = topo.get("edges", [])
    if kind == "custom":
        if not isinstance(edges, list) or not edges:
            err("topology.edges", "custom topology needs an edge list")
            edges = []
        for j, e in enumerate(edges):
            if not (isinstance(e, list) and len(e) == 2 and all(x in seen for x in e) and e[0] != e[1]):
                err(f"topology.edges[{j}]", f"edge {e!r} must join two distinct known ids")
    for j, f in enumerate(topo.get("faults", [])):
        try:
            state_from_dict(f)
        except ValueError as exc:
            err(f"topology.faults[{j}].state", str(exc))
        ln = f.get("link")
        if not (isinstance(ln, list) and len(ln) == 2):
            err(f"topology.faults[{j}].link", "link must be a pair of ids")

    proto = doc.get("protocol", {})
    if not isinstance(proto, dict):
        err("protocol", "protocol must be an object")
        proto = {}
    quorum = proto.get("quorum", "auto")
    if quorum != "auto":
        t = quorum.get("t") if isinstance(quorum, dict) else quorum
        n = quorum.get("n", n_int) if isinstance(quorum, dict) else n_int
        try:
            SharingPolicy(n, t if isinstance(t, int) else -1)
            if n != n_int:
                err("protocol.quorum", f"quorum n={n} differs from {n_int} integrators")
        except SharingError as exc:
            err("protocol.quorum", str(exc))
    bits = proto.get("signature_length_bits", 256)
    if not isinstance(bits, int) or bits < 1:
        err("protocol.signature_length_bits", "must be a positive integer")
    if not isinstance(proto.get("fanout", 2), int) or proto.get("fanout", 2) < 2:
        err("protocol.fanout", "fanout must be an integer >= 2")
    clock = proto.get("clock_ghz", 1.0)
    if not isinstance(clock, (int, float)) or clock <= 0:
        err("protocol.clock_ghz", "clock must be positive")
    hc = proto.get("hash_cycles", 96)
    if not isinstance(hc, int) or hc < 1:
        err("protocol.hash_cycles", "hash_cycles must be >= 1")

    for k, attack in enumerate(doc.get("attacks", [])):
        kind_a = attack.get("type") if isinstance(attack, dict) else None
        if kind_a not in ATTACK_TYPES:
            err(f"attacks[{k}].type", f"unknown attack {kind_a!r}; allowed: {', '.join(ATTACK_TYPES)}",
                _line_of(text, rf'"type"\s*:\s*"{re.escape(str(kind_a))}"'))
            continue
        if attack.get("trials", 1) < 1:
            err(f"attacks[{k}].trials", "trials must be >= 1")
        if kind_a == "bit_flip" and attack.get("k", 1) < 1:
            err(f"attacks[{k}].k", "k must be >= 1")

    if diags:
        return diags
    # structural checks that need the built graph
    try:
        scenario = Scenario.from_dict(doc)
    except (ValueError, KeyError) as exc:
        return [Diagnostic("topology", str(exc), _key_line(text, "topology"))]
    topology = scenario.topology
    if not topology.is_connected(healthy_only=False):
        err("topology.edges", "graph is not connected")
    if not diags and topo.get("coverage"):
        for a in topology.integrators:
            for b in topology.third_parties:
                if len(topology.routes(a.id, b.id)) < 2:
                    err("topology.coverage", f"pair ({a.id}, {b.id}) has fewer than 2 disjoint routes")
    return diags


def enrollment_challenge(seed: int) -> bytes:
    return hashlib.sha256(b"authentree/challenge" + (seed % 2**64).to_bytes(8, "big")).digest()[:CHALLENGE_BYTES]


def recorded_digest(seed: int, chip: Chiplet, bits: int) -> Digest256:
    """The chiplet's genuine response from session 0, before any live session."""
    nonce = hashlib.sha256(b"authentree/recorded" + (seed % 2**64).to_bytes(8, "big")).digest()[:16]
    sig = puf_response(chip.puf_secret, enrollment_challenge(seed), bits)
    return session_digest(sig, SessionContext(0, nonce), chip.id)


@dataclass
class Scenario:
    """A built scenario: live topology, manifest and protocol settings."""

    name: str
    seed: int
    topology: Topology
    manifest: Manifest
    protocol: ProtocolConfig
    attacks: list[dict] = field(default_factory=list)
    doc: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict, seed: Optional[int] = None,
                  signature_bits: Optional[int] = None) -> "Scenario":
        seed = doc["seed"] if seed is None else seed
        topo = doc["topology"]
        proto = doc.get("protocol", {})
        bits = signature_bits or proto.get("signature_length_bits", 256)
        hash_cycles = proto.get("hash_cycles", 96)
        chiplets = []
        for node in topo["nodes"]:
            behavior = Behavior(node.get("behavior", "honest"))
            secret = derive_secret(seed, node["id"])
            if behavior is Behavior.COUNTERFEIT:
                secret = derive_secret(seed, node["id"], "counterfeit")
            chip = Chiplet(node["id"], Role(node["role"]), secret, hash_cycles, behavior,
                           tamper_bits=tuple(node.get("tamper_bits", ())))
            if behavior is Behavior.REPLAY:
                chip.replay_digest = recorded_digest(seed, chip, proto.get("signature_length_bits", 256)
                                                     if signature_bits is None else signature_bits)
            chiplets.append(chip)
        kind = topo.get("kind", "custom")
        kw = {"link_latency": topo.get("link_latency", 1)}
        if kind == "custom":
            topology = Topology(chiplets, [tuple(e) for e in topo["edges"]], **kw)
        else:
            topology = TOPOLOGY_BUILDERS[kind](chiplets, **kw)
        for f in topo.get("faults", []):
            state = state_from_dict(f)
            if "from_cycle" in f or "to_cycle" in f:
                topology.schedule_fault(tuple(f["link"]), state, f.get("from_cycle", 0), f.get("to_cycle"))
            else:
                topology.inject_link_fault(tuple(f["link"]), state)
        challenge = enrollment_challenge(seed)
        genuine = [Chiplet(c.id, c.role, derive_secret(seed, c.id), hash_cycles) for c in chiplets]
        manifest = Manifest.enroll(genuine, challenge, bits)
        quorum = proto.get("quorum", "auto")
        t = None
        if quorum != "auto":
            t = quorum["t"] if isinstance(quorum, dict) else int(quorum)
        config = ProtocolConfig(quorum_t=t, signature_bits=bits, fanout=proto.get("fanout", 2),
                                clock_ghz=float(proto.get("clock_ghz", 1.0)), hash_cycles=hash_cycles)
        return cls(doc.get("name", "scenario"), seed, topology, manifest, config,
                   list(doc.get("attacks", [])), copy.deepcopy(doc))

    def rebuild(self, seed: Optional[int] = None, signature_bits: Optional[int] = None) -> "Scenario":
        return Scenario.from_dict(self.doc, seed if seed is not None else self.seed, signature_bits)

    def engine(self) -> AuthenTree:
        return AuthenTree(self.topology, self.manifest, self.protocol, self.seed)

    def authenticate(self):
        return authenticate_sip(self.topology, self.manifest, self.protocol, self.seed)


def load(path: Union[str, Path], seed: Optional[int] = None) -> Scenario:
    """Read, validate and build a scenario file; raises :class:`ConfigError`."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([Diagnostic("<json>", exc.msg, exc.lineno)]) from None
    diags = validate(doc, text)
    if diags:
        raise ConfigError(diags)
    return Scenario.from_dict(doc, seed)
