import json
import logging
import os
from typing import Any, Dict, List, Optional

import numpy as np

from ..exceptions import (
    DimensionMismatchError,
    PersistenceError,
    StructInferError,
    UnsupportedVersionError,
)
from ..interfaces import CheckpointStore
from ..models import Dims
from ..params import Checkpoint, ModelParams, ParamBlockSet, block_shapes

CHECKPOINT_FORMAT_VERSION = 1


def _encode_blocks(params: ModelParams) -> List[Dict[str, Any]]:
    return [
        {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in b.arrays()
        }
        for b in params.blocks
    ]


def _decode_blocks(raw: List[Dict[str, Any]], dims: Dims, what: str) -> List[ParamBlockSet]:
    shapes = block_shapes(dims)
    blocks = []
    for k, entry in enumerate(raw):
        values = {}
        for name, shape in shapes.items():
            if name not in entry:
                raise PersistenceError(f"{what} block set {k} is missing {name}")
            declared = tuple(entry[name]["shape"])
            data = np.array(entry[name]["data"], dtype=np.float64)
            if declared != shape or data.size != int(np.prod(shape)):
                raise DimensionMismatchError(
                    f"{what} block {k}.{name}: declared shape {declared} with {data.size} "
                    f"values, dims A={dims.A}, S={dims.S} require {shape}"
                )
            values[name] = data.reshape(shape)
        blocks.append(ParamBlockSet(**values))
    return blocks


class JsonCheckpointStore(CheckpointStore):
    """
    Checkpoints as a single JSON object. Arrays are stored flattened in row-major order
    with their shapes; floats are written with their shortest round-trip representation.
    """

    def __init__(self, base_dir: Optional[str] = None):
        self.base_dir = base_dir
        self.logger = logging.getLogger(__name__)

    def _resolve(self, location: str) -> str:
        if self.base_dir and not os.path.isabs(location):
            return os.path.join(self.base_dir, location)
        return location

    def save_checkpoint(self, checkpoint: Checkpoint, location: str) -> str:
        path = self._resolve(location)
        params = checkpoint.params
        document: Dict[str, Any] = {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "dims": {"A": params.dims.A, "S": params.dims.S},
            "T": checkpoint.T,
            "mode": params.mode,
            "gated": params.gated,
            "blocks": _encode_blocks(params),
            "velocity": (
                None if checkpoint.velocity is None else _encode_blocks(checkpoint.velocity)
            ),
            "train_config": checkpoint.train_config,
            "seed": checkpoint.seed,
            "rng_state": checkpoint.rng_state,
        }
        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, "w", encoding="utf-8") as f:
                json.dump(document, f, indent=1)
                f.write("\n")
        except (OSError, TypeError, ValueError) as e:
            self.logger.error(f"Error writing checkpoint to {path}: {e}")
            raise PersistenceError(f"Cannot write checkpoint to {path}: {e}")
        self.logger.info(
            f"Saved {params.mode} checkpoint (gated={params.gated}, T={checkpoint.T}) to {path}"
        )
        return path

    def load_checkpoint(self, location: str) -> Checkpoint:
        path = self._resolve(location)
        try:
            with open(path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except OSError as e:
            self.logger.error(f"Error reading checkpoint {path}: {e}")
            raise PersistenceError(f"Cannot read checkpoint {path}: {e}")
        except json.JSONDecodeError as e:
            raise PersistenceError(f"{path}: checkpoint is not valid JSON ({e})")

        if not isinstance(document, dict):
            raise PersistenceError(f"{path}: checkpoint must be a JSON object")
        version = document.get("format_version")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise UnsupportedVersionError(
                f"{path}: unsupported checkpoint format_version {version!r}"
            )

        try:
            dims = Dims(A=int(document["dims"]["A"]), S=int(document["dims"]["S"]))
            mode = document["mode"]
            if mode not in ("tied", "untied"):
                raise PersistenceError(f"unknown weight mode {mode!r}")
            gated = document["gated"]
            if not isinstance(gated, bool):
                raise PersistenceError(f"gated must be true or false, got {gated!r}")
            params = ModelParams(
                dims=dims,
                mode=mode,
                gated=gated,
                blocks=_decode_blocks(document["blocks"], dims, "params"),
            )
            velocity = None
            if document.get("velocity") is not None:
                velocity = params.with_blocks(
                    _decode_blocks(document["velocity"], dims, "velocity")
                )
            T = int(document["T"])
            params.check(T)
            checkpoint = Checkpoint(
                params=params,
                T=T,
                velocity=velocity,
                train_config=document.get("train_config"),
                seed=document.get("seed"),
                rng_state=document.get("rng_state"),
            )
        except StructInferError as e:
            self.logger.error(f"Invalid checkpoint {path}: {e}")
            if isinstance(e, (PersistenceError, DimensionMismatchError)):
                raise
            raise PersistenceError(f"{path}: {e}") from e
        except (KeyError, TypeError, ValueError) as e:
            raise PersistenceError(f"{path}: malformed checkpoint ({e})")

        self.logger.info(f"Loaded {params.mode} checkpoint (T={T}) from {path}")
        return checkpoint
