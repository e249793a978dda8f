"""Modular search space: block nodes, candidate configs, FLOPs arithmetic.

A space has ``m`` block nodes; node ``i`` offers ``n_i`` alternative blocks
and exactly one is chosen per node, so the space holds ``prod(n_i)``
candidate networks (counted in arbitrary precision, never materialized).
All types are immutable after construction and every operation here is a
pure function, so unrestricted concurrent reads are safe.
"""

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, DeviceError, SpaceValidationError

_BLOCK_KEYS = {"flops", "latency", "energy", "switch_cost", "noop"}
_NODE_KEYS = {"base_block", "blocks"}
_SPACE_KEYS = {"name", "devices", "nodes"}


@dataclass(frozen=True)
class Block:
    """One implementation option for a node.

    ``flops`` is in MFLOPs and must be positive unless ``is_noop`` (then it
    is exactly 0). ``latency``/``energy`` map device ids to ms/mJ and may
    cover only some devices. ``switch_cost`` is the ms charged when a running
    network swaps this block in.
    """

    node_index: int
    block_index: int
    flops: float
    latency: dict = field(default_factory=dict)
    energy: dict = field(default_factory=dict)
    switch_cost: float = 0.0
    is_noop: bool = False


@dataclass(frozen=True)
class BlockNode:
    index: int
    blocks: tuple
    base_block: int = 0


@dataclass(frozen=True)
class NetworkConfig:
    """One block index per node; identifies a candidate network."""

    choices: tuple

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))

    def to_text(self) -> str:
        """Canonical comma-joined form, e.g. ``"0,2,1"``."""
        return ",".join(str(c) for c in self.choices)

    def to_dashed(self) -> str:
        """Dash-joined form used inside CSV files, e.g. ``"0-2-1"``."""
        return "-".join(str(c) for c in self.choices)

    @classmethod
    def from_text(cls, text: str) -> "NetworkConfig":
        """Parse either the comma or the dash form."""
        sep = "-" if "-" in text and "," not in text else ","
        parts = [p.strip() for p in text.split(sep)]
        try:
            return cls(tuple(int(p) for p in parts))
        except ValueError as exc:
            raise ConfigError(f"cannot parse config {text!r}: {exc}") from None

    def __len__(self) -> int:
        return len(self.choices)


@dataclass(frozen=True)
class SearchSpace:
    name: str
    nodes: tuple
    devices: tuple = ()

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def node_sizes(self) -> np.ndarray:
        return np.array([len(n.blocks) for n in self.nodes], dtype=np.int64)

    @property
    def candidate_count(self) -> int:
        """Total configs, exact arbitrary-precision integer."""
        total = 1
        for n in self.nodes:
            total *= len(n.blocks)
        return total

    @cached_property
    def max_node_size(self) -> int:
        return int(self.node_sizes.max())

    @cached_property
    def flops_table(self) -> np.ndarray:
        """(m, n_max) FLOPs per block, padded with 0 beyond each node."""
        t = np.zeros((self.num_nodes, self.max_node_size))
        for i, node in enumerate(self.nodes):
            for j, b in enumerate(node.blocks):
                t[i, j] = b.flops
        return t

    @cached_property
    def node_flops_means(self) -> np.ndarray:
        """Per-node mean block FLOPs (noop blocks included at 0)."""
        return np.array(
            [sum(b.flops for b in n.blocks) / len(n.blocks) for n in self.nodes]
        )

    @cached_property
    def noop_table(self) -> np.ndarray:
        t = np.zeros((self.num_nodes, self.max_node_size), dtype=bool)
        for i, node in enumerate(self.nodes):
            for j, b in enumerate(node.blocks):
                t[i, j] = b.is_noop
        return t

    @cached_property
    def switch_cost_table(self) -> np.ndarray:
        t = np.zeros((self.num_nodes, self.max_node_size))
        for i, node in enumerate(self.nodes):
            for j, b in enumerate(node.blocks):
                t[i, j] = b.switch_cost
        return t

    def metric_table(self, metric: str, device: str) -> np.ndarray:
        """(m, n_max) latency or energy table for one device.

        Blocks without an entry (noops, typically) contribute 0.
        """
        if metric not in ("latency", "energy"):
            raise ValueError(f"metric must be latency or energy, got {metric!r}")
        t = np.zeros((self.num_nodes, self.max_node_size))
        for i, node in enumerate(self.nodes):
            for j, b in enumerate(node.blocks):
                value = getattr(b, metric).get(device)
                if value is None:
                    if not b.is_noop:
                        raise DeviceError(
                            f"block ({i},{j}) has no {metric} entry for "
                            f"device {device!r}"
                        )
                    value = 0.0
                t[i, j] = value
        return t

    def device_covers_energy(self, device: str) -> bool:
        return all(
            b.is_noop or device in b.energy for n in self.nodes for b in n.blocks
        )

    def fingerprint(self) -> str:
        """Stable content hash used to pair delta tables with their space."""
        canon = json.dumps(space_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.blake2b(canon.encode(), digest_size=8).hexdigest()


def validate_config(space: SearchSpace, cfg: NetworkConfig) -> None:
    if len(cfg.choices) != space.num_nodes:
        raise ConfigError(
            f"config has {len(cfg.choices)} entries, space has "
            f"{space.num_nodes} nodes"
        )
    for i, c in enumerate(cfg.choices):
        if not 0 <= c < len(space.nodes[i].blocks):
            raise ConfigError(
                f"choice {c} out of range for node {i} "
                f"(has {len(space.nodes[i].blocks)} blocks)"
            )


def network_flops(space: SearchSpace, cfg: NetworkConfig) -> float:
    """Total FLOPs of a candidate network: block FLOPs are exactly additive."""
    validate_config(space, cfg)
    return float(sum(space.nodes[i].blocks[c].flops for i, c in enumerate(cfg.choices)))


def mean_space_flops(space: SearchSpace) -> float:
    """Exact mean of ``network_flops`` over every config in the space.

    Equals the sum of per-node block-FLOPs means because FLOPs are additive.
    """
    return float(space.node_flops_means.sum())


def mean_flops_containing(space: SearchSpace, node: int, block: int) -> float:
    """Exact mean FLOPs over all networks whose ``node`` uses ``block``."""
    if not 0 <= node < space.num_nodes:
        raise ConfigError(f"node index {node} out of range")
    if not 0 <= block < len(space.nodes[node].blocks):
        raise ConfigError(f"block index {block} out of range for node {node}")
    means = space.node_flops_means
    return float(space.nodes[node].blocks[block].flops + means.sum() - means[node])


def mean_flops_containing_table(space: SearchSpace) -> np.ndarray:
    """(m, n_max) table of ``mean_flops_containing`` for every block."""
    means = space.node_flops_means
    rest = means.sum() - means
    return space.flops_table + rest[:, None]


def base_network(space: SearchSpace) -> NetworkConfig:
    """The reference config: every node at its declared base block."""
    return NetworkConfig(tuple(n.base_block for n in space.nodes))


def select_average_flops_network(space: SearchSpace) -> NetworkConfig:
    """Per node, the non-noop block whose FLOPs is nearest the node mean.

    Ties break toward the lower block index. The node mean includes noop
    blocks (at 0 FLOPs); noops are excluded only from candidacy.
    """
    choices = []
    for i, node in enumerate(space.nodes):
        mean = space.node_flops_means[i]
        best_j, best_d = None, None
        for j, b in enumerate(node.blocks):
            if b.is_noop:
                continue
            d = abs(b.flops - mean)
            if best_d is None or d < best_d:
                best_j, best_d = j, d
        if best_j is None:
            raise SpaceValidationError(
                f"node {i} has only noop blocks; no average-FLOPs candidate"
            )
        choices.append(best_j)
    return NetworkConfig(tuple(choices))


# --- JSON wire format -------------------------------------------------------


def _require_keys(obj: dict, allowed: set, path: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SpaceValidationError(
            f"{path}: unknown key(s) {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def _check_metric_map(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise SpaceValidationError(f"{path}: must be an object of device -> number")
    out = {}
    for dev, v in value.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            raise SpaceValidationError(f"{path}.{dev}: must be a positive number")
        out[str(dev)] = float(v)
    return out


def space_from_dict(data: dict) -> SearchSpace:
    """Build and fully validate a space; errors name the offending JSON path."""
    if not isinstance(data, dict):
        raise SpaceValidationError("top level: must be a JSON object")
    _require_keys(data, _SPACE_KEYS, "top level")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise SpaceValidationError("name: must be a non-empty string")
    devices = data.get("devices", [])
    if not isinstance(devices, list) or not all(isinstance(d, str) for d in devices):
        raise SpaceValidationError("devices: must be a list of strings")
    if len(set(devices)) != len(devices):
        raise SpaceValidationError("devices: duplicate device id")
    raw_nodes = data.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise SpaceValidationError("nodes: must be a non-empty list")

    nodes = []
    for i, rn in enumerate(raw_nodes):
        npath = f"nodes[{i}]"
        if not isinstance(rn, dict):
            raise SpaceValidationError(f"{npath}: must be an object")
        _require_keys(rn, _NODE_KEYS, npath)
        raw_blocks = rn.get("blocks")
        if not isinstance(raw_blocks, list) or not raw_blocks:
            raise SpaceValidationError(f"{npath}.blocks: must be a non-empty list")
        base = rn.get("base_block", 0)
        if not isinstance(base, int) or isinstance(base, bool):
            raise SpaceValidationError(f"{npath}.base_block: must be an integer")
        if not 0 <= base < len(raw_blocks):
            raise SpaceValidationError(
                f"{npath}.base_block: {base} out of range for "
                f"{len(raw_blocks)} blocks"
            )
        blocks = []
        noop_count = 0
        for j, rb in enumerate(raw_blocks):
            bpath = f"{npath}.blocks[{j}]"
            if not isinstance(rb, dict):
                raise SpaceValidationError(f"{bpath}: must be an object")
            _require_keys(rb, _BLOCK_KEYS, bpath)
            is_noop = rb.get("noop", False)
            if not isinstance(is_noop, bool):
                raise SpaceValidationError(f"{bpath}.noop: must be a boolean")
            flops = rb.get("flops")
            if not isinstance(flops, (int, float)) or isinstance(flops, bool):
                raise SpaceValidationError(f"{bpath}.flops: must be a number")
            flops = float(flops)
            if is_noop:
                noop_count += 1
                if flops != 0.0:
                    raise SpaceValidationError(
                        f"{bpath}.flops: noop blocks must have flops 0, got {flops}"
                    )
                if j == base:
                    raise SpaceValidationError(
                        f"{bpath}: noop block cannot be the node's base_block"
                    )
            elif flops <= 0:
                raise SpaceValidationError(f"{bpath}.flops: must be > 0, got {flops}")
            latency = _check_metric_map(rb.get("latency", {}), f"{bpath}.latency")
            energy = _check_metric_map(rb.get("energy", {}), f"{bpath}.energy")
            switch_cost = rb.get("switch_cost", 0.0)
            if (
                not isinstance(switch_cost, (int, float))
                or isinstance(switch_cost, bool)
                or switch_cost < 0
            ):
                raise SpaceValidationError(
                    f"{bpath}.switch_cost: must be a non-negative number"
                )
            blocks.append(
                Block(
                    node_index=i,
                    block_index=j,
                    flops=flops,
                    latency=latency,
                    energy=energy,
                    switch_cost=float(switch_cost),
                    is_noop=is_noop,
                )
            )
        if noop_count > 1:
            raise SpaceValidationError(f"{npath}: at most one noop block per node")
        nodes.append(BlockNode(index=i, blocks=tuple(blocks), base_block=base))

    space = SearchSpace(name=name, nodes=tuple(nodes), devices=tuple(devices))
    for dev in devices:
        for i, node in enumerate(space.nodes):
            for j, b in enumerate(node.blocks):
                if not b.is_noop and dev not in b.latency:
                    raise SpaceValidationError(
                        f"nodes[{i}].blocks[{j}].latency: missing entry for "
                        f"declared device {dev!r}"
                    )
    return space


def space_to_dict(space: SearchSpace) -> dict:
    nodes = []
    for node in space.nodes:
        blocks = []
        for b in node.blocks:
            rb = {"flops": b.flops}
            if b.latency:
                rb["latency"] = dict(sorted(b.latency.items()))
            if b.energy:
                rb["energy"] = dict(sorted(b.energy.items()))
            if b.switch_cost:
                rb["switch_cost"] = b.switch_cost
            if b.is_noop:
                rb["noop"] = True
            blocks.append(rb)
        nodes.append({"base_block": node.base_block, "blocks": blocks})
    return {"name": space.name, "devices": list(space.devices), "nodes": nodes}


def load_space(path) -> SearchSpace:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpaceValidationError(f"{path}: not valid JSON ({exc})") from None
    return space_from_dict(data)


def save_space(space: SearchSpace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(space_to_dict(space), fh, indent=2, sort_keys=True)
        fh.write("\n")
