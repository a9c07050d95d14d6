"""Distributed, quorum-based chiplet authentication on a simulated interposer."""

from .chiplet import Behavior, Chiplet, Manifest, Role, expected_digest, generate_signature, respond_to_auth
from .config import Scenario, load
from .crypto import Digest256, SessionContext, SessionSource, Signature, flip_bits, hamming_distance, session_digest, sha256
from .interposer import (
    Corrupting, Delaying, Dropping, HEALTHY, Message, MessageKind, Topology, clique_topology,
    mesh_topology, star_topology,
)
from .protocol import (
    AuthenTree, AuthReport, Classification, FaultDiagnosis, Outcome, ProtocolConfig, ProtocolError,
    TrustTree, Verdict, authenticate_sip, latency_model,
)
from .sharing import Share, SharingPolicy, reconstruct, split, verify_commitment

__version__ = "0.1.0"
