"""Save and load PooledDecoder weights in the NQD1 container."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

import numpy as np
import torch

from network.model import NetworkSpec, PooledDecoder, ToricDecoderNet
from network.training import TrainConfig
from qec.code import ToricCode, build_toric
from qec.container import ContainerFormatError, read_container, write_container

logger = logging.getLogger(__name__)


def save_checkpoint(
    path: str | Path,
    model: PooledDecoder,
    config: TrainConfig | None = None,
    p_train: float | None = None,
) -> Path:
    tensors = {
        name: value.detach().cpu().numpy().astype(np.float32)
        for name, value in model.net.state_dict().items()
    }
    metadata = {
        "kind": "checkpoint",
        "L": model.code.L,
        "dim": model.code.dim,
        "spec": model.spec.model_dump(mode="json"),
        "train": config.model_dump(mode="json") if config else None,
        "p_train": p_train,
    }
    path = write_container(path, tensors, metadata)
    logger.info("Saved checkpoint %s (%d tensors)", path, len(tensors))
    return path


def load_checkpoint(path: str | Path, code: ToricCode | None = None) -> tuple[PooledDecoder, dict[str, Any]]:
    """Rebuild the decoder; ``code`` re-attaches the weights to another lattice size."""
    tensors, meta = read_container(path)
    if meta.get("kind") != "checkpoint":
        raise ContainerFormatError(f"{path} holds a {meta.get('kind')!r}, not a checkpoint")

    net = ToricDecoderNet(NetworkSpec.model_validate(meta["spec"]))
    reference = net.state_dict()
    missing = set(reference) - set(tensors)
    if missing:
        raise ContainerFormatError(f"{path} is missing tensors: {sorted(missing)}")
    state = {}
    for name, ref in reference.items():
        value = tensors[name]
        if value.shape != tuple(ref.shape):
            raise ContainerFormatError(f"{path}: tensor {name!r} has shape {value.shape}, expected {tuple(ref.shape)}")
        state[name] = torch.from_numpy(value).to(ref.dtype)
    net.load_state_dict(state)

    code = code or build_toric(int(meta["L"]), int(meta["dim"]))
    model = PooledDecoder(net, code)
    model.eval()
    return model, meta
