"""Bridging torch module/optimizer/RNG state to named numpy tensors for checkpoints."""

from __future__ import annotations

import numpy as np
import torch

from .errors import CheckpointError


def module_tensors(prefix: str, module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.{name}": param.detach().cpu().numpy().copy()
        for name, param in module.state_dict().items()
    }


def load_module_tensors(prefix: str, module: torch.nn.Module, tensors: dict[str, np.ndarray]):
    state = {}
    for name, param in module.state_dict().items():
        key = f"{prefix}.{name}"
        if key not in tensors:
            raise CheckpointError(f"checkpoint is missing tensor {key!r}")
        arr = tensors[key]
        if tuple(arr.shape) != tuple(param.shape):
            raise CheckpointError(
                f"tensor {key!r} has shape {tuple(arr.shape)}, expected {tuple(param.shape)}"
            )
        state[name] = torch.from_numpy(arr.copy()).to(param.dtype)
    module.load_state_dict(state)


def optimizer_tensors(prefix: str, opt: torch.optim.Optimizer) -> dict[str, np.ndarray]:
    """Adam moments and step counters as named tensors, one entry per managed param."""
    out = {}
    index = 0
    for group in opt.param_groups:
        for param in group["params"]:
            state = opt.state.get(param, {})
            for field in ("step", "exp_avg", "exp_avg_sq"):
                if field in state:
                    value = state[field]
                    if isinstance(value, torch.Tensor):
                        arr = value.detach().cpu().numpy().copy()
                    else:
                        arr = np.asarray(value, dtype=np.float64)
                    out[f"{prefix}.p{index:04d}.{field}"] = arr
            index += 1
    return out


def load_optimizer_tensors(prefix: str, opt: torch.optim.Optimizer, tensors: dict[str, np.ndarray]):
    index = 0
    for group in opt.param_groups:
        for param in group["params"]:
            state = {}
            for field in ("step", "exp_avg", "exp_avg_sq"):
                key = f"{prefix}.p{index:04d}.{field}"
                if key in tensors:
                    value = torch.from_numpy(tensors[key].copy())
                    if field == "step":
                        value = value.to(torch.float32).reshape(())
                    else:
                        value = value.to(param.dtype).reshape(param.shape)
                    state[field] = value
            if state:
                opt.state[param] = state
            index += 1


def rng_tensors() -> dict[str, np.ndarray]:
    return {"rng.torch": torch.get_rng_state().numpy().copy()}


def load_rng_tensors(tensors: dict[str, np.ndarray]):
    if "rng.torch" in tensors:
        torch.set_rng_state(torch.from_numpy(tensors["rng.torch"].copy()))
