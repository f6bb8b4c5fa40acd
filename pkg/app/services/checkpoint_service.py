"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"DEEPISP\\0"          8-byte magic
    uint32                 format version
    uint64                 header length N
    N bytes                UTF-8 JSON header, sorted keys, compact separators
    float64 arrays         parameters, then Adam first moments, then Adam
                           second moments, each in parameter declaration order

The header records the format version, the monomial-order tag, the model
config, the experiment config, the epoch, the Adam step and an array table
(name, section, shape). Identical states serialize to identical bytes.
"""

import json
import logging
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from ..core.errors import CheckpointError
from ..core.schemas import ModelConfig, TrainConfig
from ..model.color_transform import MONOMIAL_ORDER_TAG
from ..model.network import ModelParams
from ..training.optimizer import AdamState

logger = logging.getLogger(__name__)

MAGIC = b"DEEPISP\0"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<IQ")
_SECTIONS = ("param", "adam_m", "adam_v")
CHECKPOINT_NAME = "checkpoint.ckpt"


@dataclass(eq=False)
class Checkpoint:
    """Everything needed to resume training or run inference"""

    params: ModelParams
    adam: AdamState
    epoch: int
    experiment: Optional[Dict[str, Any]] = None

    @property
    def train_config(self) -> Optional[TrainConfig]:
        return TrainConfig.model_validate(self.experiment) if self.experiment is not None else None


class CheckpointService:
    """Service for writing and reading checkpoints of one run directory"""

    def __init__(self, directory: Path):
        self.directory = Path(directory)

    @property
    def latest_path(self) -> Path:
        return self.directory / CHECKPOINT_NAME

    def encode(self, checkpoint: Checkpoint) -> bytes:
        """Serialize a checkpoint to bytes

        Args:
            checkpoint (Checkpoint): State to serialize

        Returns:
            bytes: The container, deterministic for identical state
        """
        params = checkpoint.params
        sections = {
            "param": params.arrays,
            "adam_m": checkpoint.adam.m,
            "adam_v": checkpoint.adam.v,
        }
        table = []
        blobs = []
        for section in _SECTIONS:
            for name in params:
                value = sections[section].get(name)
                if value is None:
                    value = np.zeros_like(params[name])
                if value.shape != params[name].shape:
                    raise CheckpointError(f"{section} array for '{name}' has shape {value.shape}")
                table.append({"name": name, "section": section, "shape": list(value.shape)})
                blobs.append(np.ascontiguousarray(value, dtype="<f8").tobytes())

        header = {
            "format_version": FORMAT_VERSION,
            "monomial_order": MONOMIAL_ORDER_TAG,
            "model_config": params.config.model_dump(mode="json"),
            "train_config": checkpoint.experiment,
            "epoch": int(checkpoint.epoch),
            "adam_step": int(checkpoint.adam.t),
            "arrays": table,
        }
        header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return MAGIC + _PREAMBLE.pack(FORMAT_VERSION, len(header_bytes)) + header_bytes + b"".join(blobs)

    def decode(self, data: bytes, source: str = "<bytes>") -> Checkpoint:
        """Parse a container produced by ``encode``"""
        if not data.startswith(MAGIC):
            raise CheckpointError(f"{source} is not a checkpoint (bad magic)")
        offset = len(MAGIC)
        if len(data) < offset + _PREAMBLE.size:
            raise CheckpointError(f"{source} is truncated")
        version, header_len = _PREAMBLE.unpack_from(data, offset)
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{source} has format version {version}, expected {FORMAT_VERSION}")
        offset += _PREAMBLE.size
        try:
            header = json.loads(data[offset : offset + header_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{source} has a malformed header: {str(e)}") from e
        offset += header_len
        if header.get("monomial_order") != MONOMIAL_ORDER_TAG:
            raise CheckpointError(
                f"{source} uses monomial order '{header.get('monomial_order')}', expected '{MONOMIAL_ORDER_TAG}'"
            )

        missing = {"arrays", "model_config", "epoch", "adam_step"} - set(header)
        if missing:
            raise CheckpointError(f"{source} header lacks {sorted(missing)}")

        sections: Dict[str, Dict[str, np.ndarray]] = {section: OrderedDict() for section in _SECTIONS}
        for entry in header["arrays"]:
            if entry.get("section") not in sections:
                raise CheckpointError(f"{source} has an array in unknown section '{entry.get('section')}'")
            shape = tuple(entry["shape"])
            size = int(np.prod(shape, dtype=np.int64)) * 8
            if offset + size > len(data):
                raise CheckpointError(f"{source} is truncated in array '{entry['name']}'")
            value = np.frombuffer(data, dtype="<f8", count=size // 8, offset=offset).astype(np.float64)
            sections[entry["section"]][entry["name"]] = value.reshape(shape)
            offset += size
        if offset != len(data):
            raise CheckpointError(f"{source} has {len(data) - offset} unexpected trailing bytes")

        try:
            params = ModelParams(ModelConfig.model_validate(header["model_config"]), sections["param"])
        except ValueError as e:
            raise CheckpointError(f"{source} holds parameters inconsistent with its config: {str(e)}") from e
        adam = AdamState(dict(sections["adam_m"]), dict(sections["adam_v"]), int(header["adam_step"]))
        return Checkpoint(params, adam, int(header["epoch"]), header.get("train_config"))

    def save(self, checkpoint: Checkpoint, path: Optional[Path] = None) -> Path:
        """Write a checkpoint atomically (temp file + rename)

        Args:
            checkpoint (Checkpoint): State to write
            path (Optional[Path]): Destination, defaults to the run's latest checkpoint

        Returns:
            Path: The written file
        """
        path = Path(path) if path is not None else self.latest_path
        path.parent.mkdir(parents=True, exist_ok=True)
        temp = path.with_name(path.name + ".tmp")
        try:
            temp.write_bytes(self.encode(checkpoint))
            os.replace(temp, path)
        except OSError as e:
            logger.error(f"Failed to write checkpoint {path}: {str(e)}")
            raise CheckpointError(f"Could not write checkpoint {path}: {str(e)}") from e
        logger.info(f"Checkpoint for epoch {checkpoint.epoch} written to {path}")
        return path

    def load(self, path: Optional[Path] = None) -> Checkpoint:
        """Read a checkpoint, by default the run's latest one"""
        path = Path(path) if path is not None else self.latest_path
        try:
            data = path.read_bytes()
        except OSError as e:
            raise CheckpointError(f"Could not read checkpoint {path}: {str(e)}") from e
        checkpoint = self.decode(data, str(path))
        logger.info(f"Loaded checkpoint {path} (epoch {checkpoint.epoch})")
        return checkpoint

    def exists(self) -> bool:
        return self.latest_path.exists()
