"""Ground-truth performance oracles.

Two oracle kinds share one interface: ``TabularOracle`` answers from a file
of measured records (pure lookup, never interpolation), and
``SyntheticOracle`` generates performance from a seeded model whose
structure mirrors the empirical laws the predictor assumes: latency and
energy are block-additive, accuracy loses a per-block amount scaled by the
ratio of mean space FLOPs to the network's own FLOPs. Noise is derived from
a stable hash of (seed, config), so results never depend on query order.
"""

import csv
import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import CapExceededError, ConfigError, OracleError
from .seeding import rng_for, stable_seed
from .space import NetworkConfig, SearchSpace, network_flops, validate_config

DEFAULT_ENUM_CAP = 1_000_000
ENUM_CAP_ENV = "BLOCKNAS_CAP"

_LAT_FLOOR = 1e-9  # noisy latency/energy are floored here to stay positive


@dataclass(frozen=True)
class PerfTriple:
    """Accuracy plus per-device latency (ms) and energy (mJ)."""

    accuracy: float
    latency: dict = field(default_factory=dict)
    energy: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise OracleError(f"accuracy {self.accuracy} outside [0, 1]")
        for name, table in (("latency", self.latency), ("energy", self.energy)):
            for dev, v in table.items():
                if v <= 0:
                    raise OracleError(f"{name}[{dev}] = {v} must be positive")


@dataclass(frozen=True)
class EvaluationRecord:
    config: NetworkConfig
    perf: PerfTriple
    flops: float | None = None


@dataclass
class BatchPerf:
    """Column-oriented oracle answers for a batch of configs."""

    accuracy: np.ndarray
    latency: dict
    energy: dict

    def triple(self, row: int) -> PerfTriple:
        return PerfTriple(
            accuracy=float(self.accuracy[row]),
            latency={d: float(v[row]) for d, v in self.latency.items()},
            energy={d: float(v[row]) for d, v in self.energy.items()},
        )


def enumeration_cap() -> int:
    raw = os.environ.get(ENUM_CAP_ENV)
    if raw is None:
        return DEFAULT_ENUM_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise CapExceededError(f"{ENUM_CAP_ENV}={raw!r} is not an integer") from None
    if cap < 1:
        raise CapExceededError(f"{ENUM_CAP_ENV} must be >= 1, got {cap}")
    return cap


class TabularOracle:
    """Exact lookup over measured records; misses are errors."""

    def __init__(self, space: SearchSpace, records):
        self.space = space
        self._by_config = {}
        for rec in records:
            key = rec.config.choices
            if key in self._by_config:
                raise OracleError(f"duplicate config {rec.config.to_text()}")
            self._by_config[key] = rec.perf
        self.devices = tuple(space.devices)

    def __len__(self) -> int:
        return len(self._by_config)

    def evaluate(self, cfg: NetworkConfig) -> PerfTriple:
        perf = self._by_config.get(tuple(cfg.choices))
        if perf is None:
            raise OracleError(
                f"no record for config {cfg.to_text()}; tabular oracles never "
                f"interpolate"
            )
        return perf

    def evaluate_batch(self, configs: np.ndarray) -> BatchPerf:
        n = configs.shape[0]
        acc = np.empty(n)
        lat = {d: np.empty(n) for d in self.devices}
        eng = {d: np.empty(n) for d in self.devices}
        for r in range(n):
            perf = self.evaluate(NetworkConfig(tuple(int(c) for c in configs[r])))
            acc[r] = perf.accuracy
            for d in self.devices:
                lat[d][r] = perf.latency[d]
                eng[d][r] = perf.energy.get(d, np.nan)
        return BatchPerf(accuracy=acc, latency=lat, energy=eng)


@dataclass(frozen=True)
class SyntheticModel:
    """Seeded generative model; identical seed + space => identical oracle.

    ``accuracy_coefficients`` holds one per-block accuracy cost; when None
    the coefficients are derived from the seed (uniform in
    ``[0, coeff_scale]`` per block). ``noise_sigma`` perturbs measured
    accuracy, ``interaction_sigma`` perturbs the true accuracy law itself,
    and the latency/energy sigmas are in ms/mJ.
    """

    seed: int
    base_accuracy: float = 0.9
    accuracy_coefficients: tuple | None = None
    coeff_scale: float = 0.05
    noise_sigma: float = 0.0
    interaction_sigma: float = 0.0
    lat_noise_sigma: float = 0.0
    eng_noise_sigma: float = 0.0


def model_to_dict(model: SyntheticModel) -> dict:
    out = {
        "seed": model.seed,
        "base_accuracy": model.base_accuracy,
        "coeff_scale": model.coeff_scale,
        "noise_sigma": model.noise_sigma,
        "interaction_sigma": model.interaction_sigma,
        "lat_noise_sigma": model.lat_noise_sigma,
        "eng_noise_sigma": model.eng_noise_sigma,
    }
    if model.accuracy_coefficients is not None:
        out["accuracy_coefficients"] = [
            list(row) for row in model.accuracy_coefficients
        ]
    return out


def model_from_dict(data: dict) -> SyntheticModel:
    known = {
        "seed",
        "base_accuracy",
        "coeff_scale",
        "noise_sigma",
        "interaction_sigma",
        "lat_noise_sigma",
        "eng_noise_sigma",
        "accuracy_coefficients",
    }
    unknown = set(data) - known
    if unknown:
        raise OracleError(f"synthetic model: unknown key(s) {sorted(unknown)}")
    coeffs = data.get("accuracy_coefficients")
    if coeffs is not None:
        coeffs = tuple(tuple(float(v) for v in row) for row in coeffs)
    return SyntheticModel(
        seed=int(data["seed"]),
        base_accuracy=float(data.get("base_accuracy", 0.9)),
        accuracy_coefficients=coeffs,
        coeff_scale=float(data.get("coeff_scale", 0.05)),
        noise_sigma=float(data.get("noise_sigma", 0.0)),
        interaction_sigma=float(data.get("interaction_sigma", 0.0)),
        lat_noise_sigma=float(data.get("lat_noise_sigma", 0.0)),
        eng_noise_sigma=float(data.get("eng_noise_sigma", 0.0)),
    )


class SyntheticOracle:
    """Vectorized evaluator for a SyntheticModel bound to one space.

    Latency/energy contributions per block are the space's own per-block
    latency/energy tables; the model adds only coefficients and noise.
    """

    def __init__(self, model: SyntheticModel, space: SearchSpace):
        self.model = model
        self.space = space
        self.devices = tuple(space.devices)
        self._mean_space = float(space.node_flops_means.sum())
        self._flops = space.flops_table
        self._coeff = self._build_coeffs()
        self._lat = {d: space.metric_table("latency", d) for d in self.devices}
        self._eng = {
            d: space.metric_table("energy", d)
            for d in self.devices
            if space.device_covers_energy(d)
        }
        s = model.seed
        self._acc_seed = stable_seed(s, "noise-acc")
        self._int_seed = stable_seed(s, "interaction")
        self._lat_seeds = {d: stable_seed(s, f"noise-lat:{d}") for d in self.devices}
        self._eng_seeds = {d: stable_seed(s, f"noise-eng:{d}") for d in self._eng}

    def _build_coeffs(self) -> np.ndarray:
        m, nmax = self.space.num_nodes, self.space.max_node_size
        table = np.zeros((m, nmax))
        if self.model.accuracy_coefficients is not None:
            rows = self.model.accuracy_coefficients
            if len(rows) != m:
                raise OracleError(
                    f"accuracy_coefficients has {len(rows)} rows, space has {m} nodes"
                )
            for i, row in enumerate(rows):
                n_i = len(self.space.nodes[i].blocks)
                if len(row) != n_i:
                    raise OracleError(
                        f"accuracy_coefficients[{i}] has {len(row)} entries, "
                        f"node has {n_i} blocks"
                    )
                table[i, :n_i] = row
        else:
            for i in range(m):
                n_i = len(self.space.nodes[i].blocks)
                rng = rng_for(self.model.seed, "acc-coeff", i)
                table[i, :n_i] = rng.uniform(0.0, self.model.coeff_scale, n_i)
        return table

    def accuracy_law(self, configs: np.ndarray) -> np.ndarray:
        """Noise-free accuracy before clamping (the pure reciprocal law)."""
        total = kernels.gather_sum(self._flops, configs)
        if np.any(total <= 0):
            bad = int(np.argmax(total <= 0))
            raise OracleError(
                f"config {'-'.join(map(str, configs[bad]))} has zero FLOPs "
                f"(all-noop); accuracy law undefined"
            )
        cost = kernels.gather_sum(self._coeff, configs)
        return self.model.base_accuracy - cost * self._mean_space / total

    def evaluate_batch(self, configs: np.ndarray) -> BatchPerf:
        configs = np.ascontiguousarray(configs, dtype=np.int64)
        acc = self.accuracy_law(configs)
        if self.model.interaction_sigma > 0:
            acc = acc + self.model.interaction_sigma * kernels.normals_for_configs(
                self._int_seed, configs
            )
        if self.model.noise_sigma > 0:
            acc = acc + self.model.noise_sigma * kernels.normals_for_configs(
                self._acc_seed, configs
            )
        acc = np.clip(acc, 0.0, 1.0)
        lat = {}
        for d in self.devices:
            v = kernels.gather_sum(self._lat[d], configs)
            if self.model.lat_noise_sigma > 0:
                v = v + self.model.lat_noise_sigma * kernels.normals_for_configs(
                    self._lat_seeds[d], configs
                )
                v = np.maximum(v, _LAT_FLOOR)
            lat[d] = v
        eng = {}
        for d in self._eng:
            v = kernels.gather_sum(self._eng[d], configs)
            if self.model.eng_noise_sigma > 0:
                v = v + self.model.eng_noise_sigma * kernels.normals_for_configs(
                    self._eng_seeds[d], configs
                )
                v = np.maximum(v, _LAT_FLOOR)
            eng[d] = v
        return BatchPerf(accuracy=acc, latency=lat, energy=eng)

    def evaluate(self, cfg: NetworkConfig) -> PerfTriple:
        validate_config(self.space, cfg)
        batch = self.evaluate_batch(np.array([cfg.choices], dtype=np.int64))
        return batch.triple(0)

    def clamp_count(self, configs: np.ndarray) -> int:
        """How many of these configs have their accuracy clamped to [0, 1]."""
        configs = np.ascontiguousarray(configs, dtype=np.int64)
        acc = self.accuracy_law(configs)
        if self.model.interaction_sigma > 0:
            acc = acc + self.model.interaction_sigma * kernels.normals_for_configs(
                self._int_seed, configs
            )
        if self.model.noise_sigma > 0:
            acc = acc + self.model.noise_sigma * kernels.normals_for_configs(
                self._acc_seed, configs
            )
        return int(np.sum((acc < 0.0) | (acc > 1.0)))


def synth_eval(model: SyntheticModel, space: SearchSpace, cfg: NetworkConfig) -> PerfTriple:
    """One-off evaluation; prefer SyntheticOracle for repeated queries."""
    return SyntheticOracle(model, space).evaluate(cfg)


# --- enumeration and sampling ------------------------------------------------


def enumerate_batches(space: SearchSpace, oracle, chunk: int = 65536, cap=None):
    """Yield (configs, BatchPerf) chunks over the whole space in lex order."""
    total = space.candidate_count
    cap = enumeration_cap() if cap is None else cap
    if total > cap:
        raise CapExceededError(
            f"space holds {total} configs, over the cap of {cap}; sample "
            f"configs instead of enumerating (or raise {ENUM_CAP_ENV})"
        )
    sizes = space.node_sizes
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        configs = kernels.enumerate_configs(sizes, start, stop)
        yield configs, oracle.evaluate_batch(configs)


def enumerate_all(space: SearchSpace, oracle, cap=None):
    """Stream (NetworkConfig, PerfTriple) for every config, lex order."""
    for configs, batch in enumerate_batches(space, oracle, cap=cap):
        for r in range(configs.shape[0]):
            cfg = NetworkConfig(tuple(int(c) for c in configs[r]))
            yield cfg, batch.triple(r)


def sample_config_array(space: SearchSpace, count: int, seed: int) -> np.ndarray:
    """(count, m) uniform i.i.d. choices per node; duplicates allowed."""
    rng = rng_for(seed, "sample-configs")
    cols = [
        rng.integers(0, len(node.blocks), size=count) for node in space.nodes
    ]
    return np.stack(cols, axis=1).astype(np.int64)


def sample_configs(space, count: int, seed: int, allow_empty: bool = False):
    """Uniform i.i.d. config sample as a list; deterministic for fixed seed."""
    if count < 1:
        if count == 0 and allow_empty:
            return []
        raise ConfigError(f"sample count must be >= 1, got {count}")
    arr = sample_config_array(space, count, seed)
    return [NetworkConfig(tuple(int(c) for c in row)) for row in arr]


# --- records file ------------------------------------------------------------


def _parse_float(text: str, what: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise OracleError(f"line {line}: {what} {text!r} is not a number") from None


def load_records(path, space: SearchSpace):
    """Read an evaluation-records CSV validated against ``space``.

    Header: ``config,accuracy,latency_<dev>...,energy_<dev>...[,flops]``.
    Configs are dash-joined (``0-2-1``). Malformed rows report their line
    number; duplicate or out-of-range configs are rejected.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise OracleError(f"{path}: empty records file") from None
        if not header or header[0] != "config" or "accuracy" not in header:
            raise OracleError(
                f"{path}: header must start with 'config' and include 'accuracy'"
            )
        acc_col = header.index("accuracy")
        lat_cols = {h[len("latency_"):]: k for k, h in enumerate(header) if h.startswith("latency_")}
        eng_cols = {h[len("energy_"):]: k for k, h in enumerate(header) if h.startswith("energy_")}
        flops_col = header.index("flops") if "flops" in header else None

        records = []
        seen = set()
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise OracleError(
                    f"line {line}: expected {len(header)} fields, got {len(row)}"
                )
            cfg = NetworkConfig.from_text(row[0])
            try:
                validate_config(space, cfg)
            except ConfigError as exc:
                raise OracleError(f"line {line}: {exc}") from None
            if cfg.choices in seen:
                raise OracleError(f"line {line}: duplicate config {row[0]}")
            seen.add(cfg.choices)
            acc = _parse_float(row[acc_col], "accuracy", line)
            lat = {d: _parse_float(row[k], f"latency_{d}", line) for d, k in lat_cols.items()}
            eng = {d: _parse_float(row[k], f"energy_{d}", line) for d, k in eng_cols.items()}
            try:
                perf = PerfTriple(accuracy=acc, latency=lat, energy=eng)
            except OracleError as exc:
                raise OracleError(f"line {line}: {exc}") from None
            flops = None
            if flops_col is not None and row[flops_col] != "":
                flops = _parse_float(row[flops_col], "flops", line)
                expected = network_flops(space, cfg)
                if not math.isclose(flops, expected, rel_tol=1e-6):
                    raise OracleError(
                        f"line {line}: flops {flops} does not match the "
                        f"config's computed {expected}"
                    )
            records.append(EvaluationRecord(config=cfg, perf=perf, flops=flops))
    return records


def save_records(path, space: SearchSpace, records) -> None:
    devices = tuple(space.devices)
    header = (
        ["config", "accuracy"]
        + [f"latency_{d}" for d in devices]
        + [f"energy_{d}" for d in devices]
        + ["flops"]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            row = [rec.config.to_dashed(), repr(rec.perf.accuracy)]
            row += [repr(rec.perf.latency[d]) for d in devices]
            row += [repr(rec.perf.energy[d]) for d in devices]
            row.append("" if rec.flops is None else repr(rec.flops))
            writer.writerow(row)
