"""Closed-form, training-free network performance prediction.

Latency and energy are the base network's values minus the chosen blocks'
deltas. Accuracy subtracts each delta scaled by the ratio of the block's
mean-containing FLOPs to the candidate network's own FLOPs, reflecting that
lighter networks are more sensitive to a block swap. All functions are pure
over immutable tables.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DeviceError
from .estimator import BlockDeltaTable
from .oracle import PerfTriple
from .space import NetworkConfig, SearchSpace, network_flops, validate_config


@dataclass(frozen=True)
class Prediction:
    """Predicted triple plus a per-node contribution breakdown.

    ``base - sum(component column) == perf`` reassembles exactly, which makes
    the breakdown trustworthy for debugging and reporting.
    """

    perf: PerfTriple
    flops: float
    components: tuple  # one dict per node: accuracy/latency/energy terms
    accuracy_clamped: bool = False
    accuracy_raw: float = 0.0


def _check_device(table: BlockDeltaTable, device: str, need_energy: bool) -> None:
    if device not in table.lat_delta:
        raise DeviceError(
            f"device {device!r} not in delta table (has {sorted(table.lat_delta)})"
        )
    if need_energy and device not in table.eng_delta:
        raise DeviceError(f"device {device!r} has no energy deltas in the table")


def _predict(table: BlockDeltaTable, space: SearchSpace, cfg: NetworkConfig,
             device: str, flops_scaling: bool) -> Prediction:
    table.check_space(space)
    validate_config(space, cfg)
    _check_device(table, device, need_energy=False)
    flops = network_flops(space, cfg)

    has_energy = device in table.eng_delta
    components = []
    acc_sum = 0.0
    lat_sum = 0.0
    eng_sum = 0.0
    for i, j in enumerate(cfg.choices):
        if flops_scaling:
            acc_term = table.acc_delta[i, j] * table.mean_flops_containing[i, j] / flops
        else:
            acc_term = table.acc_delta[i, j]
        lat_term = table.lat_delta[device][i, j]
        eng_term = table.eng_delta[device][i, j] if has_energy else 0.0
        comp = {"accuracy": float(acc_term), "latency": float(lat_term)}
        if has_energy:
            comp["energy"] = float(eng_term)
        components.append(comp)
        acc_sum += acc_term
        lat_sum += lat_term
        eng_sum += eng_term

    acc_raw = table.base_perf.accuracy - acc_sum
    acc = min(1.0, max(0.0, acc_raw))
    lat = table.base_perf.latency[device] - lat_sum
    perf = PerfTriple(
        accuracy=acc,
        latency={device: lat},
        energy={device: table.base_perf.energy[device] - eng_sum} if has_energy else {},
    )
    return Prediction(
        perf=perf,
        flops=flops,
        components=tuple(components),
        accuracy_clamped=acc != acc_raw,
        accuracy_raw=float(acc_raw),
    )


def predict(table: BlockDeltaTable, space: SearchSpace, cfg: NetworkConfig,
            device: str) -> Prediction:
    """Predict accuracy/latency/energy of ``cfg`` from block deltas alone."""
    return _predict(table, space, cfg, device, flops_scaling=True)


def predict_no_flops_scaling(table: BlockDeltaTable, space: SearchSpace,
                             cfg: NetworkConfig, device: str) -> Prediction:
    """Ablation variant: accuracy deltas summed without the FLOPs ratio."""
    return _predict(table, space, cfg, device, flops_scaling=False)


def predict_batch(table: BlockDeltaTable, space: SearchSpace, configs,
                  device: str):
    """Element-wise ``predict`` preserving order; fails with the bad index."""
    out = []
    for k, cfg in enumerate(configs):
        try:
            out.append(predict(table, space, cfg, device))
        except Exception as exc:
            raise type(exc)(f"config #{k}: {exc}") from None
    return out


def predict_arrays(table: BlockDeltaTable, space: SearchSpace,
                   configs: np.ndarray, device: str,
                   flops_scaling: bool = True) -> dict:
    """Vectorized prediction over an (N, m) config array.

    Returns unclamped accuracy alongside the clamped one; used by the
    evaluation sweeps and the exhaustive solver path, and agrees with
    ``predict`` to float64 round-off.
    """
    table.check_space(space)
    _check_device(table, device, need_energy=False)
    configs = np.ascontiguousarray(configs, dtype=np.int64)
    flops = kernels.gather_sum(space.flops_table, configs)
    if flops_scaling:
        acc_sum = kernels.gather_sum(
            table.acc_delta * table.mean_flops_containing, configs
        ) / flops
    else:
        acc_sum = kernels.gather_sum(table.acc_delta, configs)
    acc_raw = table.base_perf.accuracy - acc_sum
    lat = table.base_perf.latency[device] - kernels.gather_sum(
        table.lat_delta[device], configs
    )
    out = {
        "flops": flops,
        "accuracy_raw": acc_raw,
        "accuracy": np.clip(acc_raw, 0.0, 1.0),
        "latency": lat,
    }
    if device in table.eng_delta:
        out["energy"] = table.base_perf.energy[device] - kernels.gather_sum(
            table.eng_delta[device], configs
        )
    return out


def prediction_to_dict(pred: Prediction, device: str) -> dict:
    return {
        "accuracy": pred.perf.accuracy,
        "accuracy_raw": pred.accuracy_raw,
        "accuracy_clamped": pred.accuracy_clamped,
        "latency": pred.perf.latency[device],
        "energy": pred.perf.energy.get(device),
        "flops": pred.flops,
        "components": list(pred.components),
    }
