"""Block-delta estimation.

A block's delta is the performance change from switching a node's base
block to that block, holding the rest of the network fixed (base value
minus new value, so predictions subtract deltas from the base network's
performance). Three modes trade oracle calls for averaging breadth:

* full    - average over every network hosting the base block
* partial - average over a seeded random sample of host networks per block
* single  - one host: the average-FLOPs network with the node reset to base

Oracle calls are memoized across (node, block) pairs, which is what gives
single mode its ``1 + sum(n_i - 1)`` evaluation budget.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    CapExceededError,
    EstimationError,
    FingerprintError,
    SpaceValidationError,
)
from .oracle import enumeration_cap
from .seeding import rng_for
from .space import (
    NetworkConfig,
    SearchSpace,
    mean_flops_containing_table,
    mean_space_flops,
    select_average_flops_network,
)


@dataclass(frozen=True)
class FullMode:
    kind: str = field(default="full", init=False)


@dataclass(frozen=True)
class PartialMode:
    sample_count: int
    seed: int
    dedupe: bool = False
    kind: str = field(default="partial", init=False)


@dataclass(frozen=True)
class SingleMode:
    basenet: str = "avg"  # "avg" or "random"
    basenet_seed: int = 0
    base_override: object = None  # None | int | "random" | tuple of ints
    kind: str = field(default="single", init=False)


@dataclass
class BlockDeltaTable:
    """The predictor's entire state: per-block deltas plus base anchors."""

    fingerprint: str
    base_config: NetworkConfig
    base_perf: "PerfTriple"
    acc_delta: np.ndarray
    lat_delta: dict
    eng_delta: dict
    mean_flops_containing: np.ndarray
    mean_space_flops: float
    mode: dict
    node_sizes: tuple
    avg_config: NetworkConfig | None = None
    eval_count: int = 0

    @property
    def devices(self) -> tuple:
        return tuple(self.lat_delta)

    def check_space(self, space: SearchSpace) -> None:
        if space.fingerprint() != self.fingerprint:
            raise FingerprintError(
                "delta table was built for a different space "
                f"(table {self.fingerprint}, space {space.fingerprint()})"
            )


def _resolve_bases(space: SearchSpace, base_override, seed: int) -> tuple:
    """Per-node base blocks after any ablation override; noops rejected."""
    if base_override is None:
        bases = tuple(n.base_block for n in space.nodes)
    elif base_override == "random":
        rng = rng_for(seed, "base-override")
        bases = []
        for node in space.nodes:
            candidates = [j for j, b in enumerate(node.blocks) if not b.is_noop]
            bases.append(int(candidates[rng.integers(len(candidates))]))
        bases = tuple(bases)
    elif isinstance(base_override, int):
        bases = tuple(base_override for _ in space.nodes)
    else:
        bases = tuple(int(b) for b in base_override)
    if len(bases) != space.num_nodes:
        raise EstimationError(
            f"base override has {len(bases)} entries for {space.num_nodes} nodes"
        )
    for i, b in enumerate(bases):
        if not 0 <= b < len(space.nodes[i].blocks):
            raise EstimationError(f"base override {b} out of range at node {i}")
        if space.nodes[i].blocks[b].is_noop:
            raise EstimationError(f"base override at node {i} selects a noop block")
    return bases


def _empty_tables(space: SearchSpace, devices, eng_devices):
    m, nmax = space.num_nodes, space.max_node_size
    return (
        np.zeros((m, nmax)),
        {d: np.zeros((m, nmax)) for d in devices},
        {d: np.zeros((m, nmax)) for d in eng_devices},
    )


def _finish_table(space, oracle, mode_meta, bases, dA, dL, dE, base_perf,
                  avg_config, eval_count) -> BlockDeltaTable:
    return BlockDeltaTable(
        fingerprint=space.fingerprint(),
        base_config=NetworkConfig(bases),
        base_perf=base_perf,
        acc_delta=dA,
        lat_delta=dL,
        eng_delta=dE,
        mean_flops_containing=mean_flops_containing_table(space),
        mean_space_flops=mean_space_flops(space),
        mode=mode_meta,
        node_sizes=tuple(int(n) for n in space.node_sizes),
        avg_config=avg_config,
        eval_count=eval_count,
    )


def estimate_full(space: SearchSpace, oracle) -> BlockDeltaTable:
    """Average every block's switching delta over all host networks.

    Requires the space to fit under the enumeration cap; every config is
    evaluated exactly once.
    """
    total = space.candidate_count
    cap = enumeration_cap()
    if total > cap:
        raise CapExceededError(
            f"full-mode estimation would evaluate {total} configs, over the "
            f"cap of {cap}; use partial or single mode"
        )
    sizes = space.node_sizes
    strides = kernels.config_strides(sizes)
    configs = kernels.enumerate_configs(sizes)
    batch = oracle.evaluate_batch(configs)
    devices = tuple(batch.latency)
    eng_devices = tuple(batch.energy)
    bases = tuple(n.base_block for n in space.nodes)

    dA, dL, dE = _empty_tables(space, devices, eng_devices)
    for i in range(space.num_nodes):
        b_i = bases[i]
        host_idx = np.nonzero(configs[:, i] == b_i)[0]
        for j in range(int(sizes[i])):
            if j == b_i:
                continue
            partner_idx = host_idx + (j - b_i) * strides[i]
            dA[i, j] = float(np.mean(batch.accuracy[host_idx] - batch.accuracy[partner_idx]))
            for d in devices:
                dL[d][i, j] = float(np.mean(batch.latency[d][host_idx] - batch.latency[d][partner_idx]))
            for d in eng_devices:
                dE[d][i, j] = float(np.mean(batch.energy[d][host_idx] - batch.energy[d][partner_idx]))

    base_idx = int(np.dot(np.array(bases, dtype=np.int64), strides))
    base_perf = batch.triple(base_idx)
    return _finish_table(
        space, oracle, {"kind": "full"}, bases, dA, dL, dE, base_perf,
        avg_config=None, eval_count=int(total),
    )


def _partial_hosts(space: SearchSpace, bases, i: int, j: int,
                   sample_count: int, seed: int, dedupe: bool) -> np.ndarray:
    """Host configs (node i at its base) for one (node, block) pair."""
    sizes = space.node_sizes
    other = [k for k in range(space.num_nodes) if k != i]
    rng = rng_for(seed, "partial-host", i, j)
    if dedupe:
        population = 1
        for k in other:
            population *= int(sizes[k])
        take = min(sample_count, population)
        flat = (
            np.arange(population, dtype=np.int64)
            if take == population
            else np.sort(rng.choice(population, size=take, replace=False))
        )
        hosts = np.empty((take, space.num_nodes), dtype=np.int64)
        rest_strides = kernels.config_strides(sizes[other])
        for col, k in enumerate(other):
            hosts[:, k] = (flat // rest_strides[col]) % sizes[k]
    else:
        hosts = np.empty((sample_count, space.num_nodes), dtype=np.int64)
        for k in other:
            hosts[:, k] = rng.integers(0, int(sizes[k]), size=sample_count)
    hosts[:, i] = bases[i]
    return hosts


def _partial_query_plan(space: SearchSpace, mode: PartialMode):
    """All (pair -> host/partner row ids) plus the deduplicated config list."""
    bases = tuple(n.base_block for n in space.nodes)
    index_of = {}
    rows = []

    def intern(cfg_row) -> int:
        key = tuple(int(c) for c in cfg_row)
        idx = index_of.get(key)
        if idx is None:
            idx = len(rows)
            index_of[key] = idx
            rows.append(key)
        return idx

    base_row = intern(bases)
    plan = {}
    for i in range(space.num_nodes):
        for j in range(int(space.node_sizes[i])):
            if j == bases[i]:
                continue
            hosts = _partial_hosts(
                space, bases, i, j, mode.sample_count, mode.seed, mode.dedupe
            )
            partners = hosts.copy()
            partners[:, i] = j
            h_idx = np.array([intern(r) for r in hosts], dtype=np.int64)
            p_idx = np.array([intern(r) for r in partners], dtype=np.int64)
            plan[(i, j)] = (h_idx, p_idx)
    return bases, base_row, plan, np.array(rows, dtype=np.int64)


def estimate_partial(space: SearchSpace, oracle, sample_count: int, seed: int,
                     dedupe: bool = False) -> BlockDeltaTable:
    """Full-mode estimator over ``sample_count`` sampled hosts per block pair.

    Hosts are uniform over the networks holding the node's base block
    (i.i.d., duplicates allowed; ``dedupe`` samples without replacement and
    collapses to full mode once the sample covers the host population).
    """
    if sample_count < 1:
        raise EstimationError(f"sample_count must be >= 1, got {sample_count}")
    mode = PartialMode(sample_count=sample_count, seed=seed, dedupe=dedupe)
    bases, base_row, plan, unique = _partial_query_plan(space, mode)
    batch = oracle.evaluate_batch(unique)
    devices = tuple(batch.latency)
    eng_devices = tuple(batch.energy)

    dA, dL, dE = _empty_tables(space, devices, eng_devices)
    for (i, j), (h_idx, p_idx) in plan.items():
        dA[i, j] = float(np.mean(batch.accuracy[h_idx] - batch.accuracy[p_idx]))
        for d in devices:
            dL[d][i, j] = float(np.mean(batch.latency[d][h_idx] - batch.latency[d][p_idx]))
        for d in eng_devices:
            dE[d][i, j] = float(np.mean(batch.energy[d][h_idx] - batch.energy[d][p_idx]))

    meta = {"kind": "partial", "sample_count": sample_count, "seed": seed,
            "dedupe": dedupe}
    return _finish_table(
        space, oracle, meta, bases, dA, dL, dE, batch.triple(base_row),
        avg_config=None, eval_count=unique.shape[0],
    )


def _single_query_plan(space: SearchSpace, mode: SingleMode):
    if mode.basenet == "avg":
        basenet = select_average_flops_network(space)
    elif mode.basenet == "random":
        rng = rng_for(mode.basenet_seed, "random-basenet")
        choices = []
        for node in space.nodes:
            candidates = [j for j, b in enumerate(node.blocks) if not b.is_noop]
            choices.append(int(candidates[rng.integers(len(candidates))]))
        basenet = NetworkConfig(tuple(choices))
    else:
        raise EstimationError(f"unknown basenet kind {mode.basenet!r}")
    bases = _resolve_bases(space, mode.base_override, mode.basenet_seed)

    index_of = {}
    rows = []

    def intern(choices) -> int:
        key = tuple(int(c) for c in choices)
        idx = index_of.get(key)
        if idx is None:
            idx = len(rows)
            index_of[key] = idx
            rows.append(key)
        return idx

    intern(basenet.choices)
    variant_rows = {}
    for i in range(space.num_nodes):
        for j in range(int(space.node_sizes[i])):
            v = list(basenet.choices)
            v[i] = j
            variant_rows[(i, j)] = intern(v)
    base_row = intern(bases)
    return basenet, bases, base_row, variant_rows, np.array(rows, dtype=np.int64)


def estimate_single(space: SearchSpace, oracle, basenet: str = "avg",
                    basenet_seed: int = 0, base_override=None) -> BlockDeltaTable:
    """One-host estimation around the average-FLOPs network.

    ``basenet="random"`` and ``base_override`` are ablation knobs; they
    change the inputs, never the formulas.
    """
    if base_override is not None and not isinstance(base_override, (int, str)):
        base_override = tuple(int(b) for b in base_override)
    mode = SingleMode(basenet=basenet, basenet_seed=basenet_seed,
                      base_override=base_override)
    basenet_cfg, bases, base_row, variant_rows, unique = _single_query_plan(space, mode)
    batch = oracle.evaluate_batch(unique)
    devices = tuple(batch.latency)
    eng_devices = tuple(batch.energy)

    dA, dL, dE = _empty_tables(space, devices, eng_devices)
    for i in range(space.num_nodes):
        host = variant_rows[(i, bases[i])]
        for j in range(int(space.node_sizes[i])):
            if j == bases[i]:
                continue
            v = variant_rows[(i, j)]
            dA[i, j] = float(batch.accuracy[host] - batch.accuracy[v])
            for d in devices:
                dL[d][i, j] = float(batch.latency[d][host] - batch.latency[d][v])
            for d in eng_devices:
                dE[d][i, j] = float(batch.energy[d][host] - batch.energy[d][v])

    meta = {"kind": "single", "basenet": basenet, "basenet_seed": basenet_seed,
            "base_override": None if base_override is None else list(bases)}
    return _finish_table(
        space, oracle, meta, bases, dA, dL, dE, batch.triple(base_row),
        avg_config=basenet_cfg, eval_count=unique.shape[0],
    )


def evaluation_budget(space: SearchSpace, mode) -> int:
    """Exact number of distinct oracle calls the mode will make."""
    if isinstance(mode, FullMode):
        return space.candidate_count
    if isinstance(mode, PartialMode):
        _, _, _, unique = _partial_query_plan(space, mode)
        return unique.shape[0]
    if isinstance(mode, SingleMode):
        _, _, _, _, unique = _single_query_plan(space, mode)
        return unique.shape[0]
    raise EstimationError(f"unknown estimation mode {mode!r}")


# --- JSON persistence ---------------------------------------------------------


def _ragged(matrix: np.ndarray, node_sizes) -> list:
    return [[float(v) for v in matrix[i, : node_sizes[i]]] for i in range(len(node_sizes))]


def table_to_dict(table: BlockDeltaTable) -> dict:
    ns = table.node_sizes
    return {
        "fingerprint": table.fingerprint,
        "mode": table.mode,
        "node_sizes": list(ns),
        "base_config": table.base_config.to_text(),
        "avg_config": None if table.avg_config is None else table.avg_config.to_text(),
        "base_perf": {
            "accuracy": table.base_perf.accuracy,
            "latency": dict(sorted(table.base_perf.latency.items())),
            "energy": dict(sorted(table.base_perf.energy.items())),
        },
        "acc_delta": _ragged(table.acc_delta, ns),
        "lat_delta": {d: _ragged(m, ns) for d, m in sorted(table.lat_delta.items())},
        "eng_delta": {d: _ragged(m, ns) for d, m in sorted(table.eng_delta.items())},
        "mean_flops_containing": _ragged(table.mean_flops_containing, ns),
        "mean_space_flops": table.mean_space_flops,
        "eval_count": table.eval_count,
    }


def _unragged(rows, node_sizes) -> np.ndarray:
    m, nmax = len(node_sizes), max(node_sizes)
    out = np.zeros((m, nmax))
    for i, row in enumerate(rows):
        if len(row) != node_sizes[i]:
            raise SpaceValidationError(
                f"delta table row {i} has {len(row)} entries, expected {node_sizes[i]}"
            )
        out[i, : node_sizes[i]] = row
    return out


def table_from_dict(data: dict) -> BlockDeltaTable:
    from .oracle import PerfTriple

    ns = tuple(int(n) for n in data["node_sizes"])
    bp = data["base_perf"]
    return BlockDeltaTable(
        fingerprint=data["fingerprint"],
        base_config=NetworkConfig.from_text(data["base_config"]),
        base_perf=PerfTriple(
            accuracy=bp["accuracy"],
            latency={d: float(v) for d, v in bp["latency"].items()},
            energy={d: float(v) for d, v in bp["energy"].items()},
        ),
        acc_delta=_unragged(data["acc_delta"], ns),
        lat_delta={d: _unragged(m, ns) for d, m in data["lat_delta"].items()},
        eng_delta={d: _unragged(m, ns) for d, m in data["eng_delta"].items()},
        mean_flops_containing=_unragged(data["mean_flops_containing"], ns),
        mean_space_flops=float(data["mean_space_flops"]),
        mode=dict(data["mode"]),
        node_sizes=ns,
        avg_config=(
            None if data.get("avg_config") is None
            else NetworkConfig.from_text(data["avg_config"])
        ),
        eval_count=int(data.get("eval_count", 0)),
    )


def save_table(table: BlockDeltaTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table_to_dict(table), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_table(path) -> BlockDeltaTable:
    with open(path, "r", encoding="utf-8") as fh:
        return table_from_dict(json.load(fh))
