#
# Binary model file
#
#   magic      4 bytes  b"FDX1"
#   version    u16
#   header     u32 x 9: input_len, conv_filters, kernel_size, pool_size,
#                       dropout (parts per million), dense_units, n_classes,
#                       history length, best epoch
#   weights    f64, tensors in ModelWeights declaration order, row-major
#   history    f64 x 2 per epoch: loss, validation accuracy
#   checksum   u64 FNV-1a over everything between version and checksum
#
# All integers and floats little-endian.
#
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from faultdx.core import N_CLASSES, FaultDxException
from faultdx.models.network import Architecture
from faultdx.net1d.layers import ModelWeights
from faultdx.net1d.training import EpochRecord, TrainedModel

log = logging.getLogger(__name__)

MAGIC = b"FDX1"
VERSION = 1
PREAMBLE = struct.Struct("<4sH")
HEADER = struct.Struct("<9I")
CHECKSUM = struct.Struct("<Q")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK_64 = 0xFFFFFFFFFFFFFFFF
DROPOUT_SCALE = 1_000_000


class ModelFileException(FaultDxException):
    pass


def fnv1a_64(data: Union[bytes, bytearray, memoryview]) -> int:
    h, prime, mask = FNV_OFFSET, FNV_PRIME, MASK_64
    for byte in memoryview(data).cast("B"):
        h = ((h ^ byte) * prime) & mask
    return h


def _n_weights(arch: Architecture) -> int:
    return sum(int(np.prod(shape)) for shape in ModelWeights.shapes(arch).values())


def to_bytes(model: TrainedModel) -> bytes:
    arch = model.architecture
    model.weights.check(arch)

    payload = bytearray(
        HEADER.pack(
            arch.input_len,
            arch.conv_filters,
            arch.kernel_size,
            arch.pool_size,
            int(round(arch.dropout_rate * DROPOUT_SCALE)),
            arch.dense_units,
            arch.n_classes,
            len(model.history),
            model.best_epoch,
        )
    )
    for tensor in model.weights.tensors():
        payload += np.ascontiguousarray(tensor, dtype="<f8").tobytes()
    for record in model.history:
        payload += struct.pack("<2d", record.loss, record.val_accuracy)

    return PREAMBLE.pack(MAGIC, VERSION) + bytes(payload) + CHECKSUM.pack(fnv1a_64(payload))


def from_bytes(data: bytes) -> TrainedModel:
    if len(data) < PREAMBLE.size + HEADER.size + CHECKSUM.size:
        raise ModelFileException(f"Model file is truncated ({len(data)} bytes)")

    magic, version = PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise ModelFileException(f"Not a model file: magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ModelFileException(f"Unsupported model file version {version}, expected {VERSION}")

    (input_len, filters, kernel, pool, dropout_ppm, dense, n_classes, n_epochs,
     best_epoch) = HEADER.unpack_from(data, PREAMBLE.size)

    if n_classes != N_CLASSES:
        raise ModelFileException(f"Model has {n_classes} classes, expected {N_CLASSES}")

    try:
        arch = Architecture(
            input_len=input_len,
            conv_filters=filters,
            kernel_size=kernel,
            pool_size=pool,
            dropout_rate=dropout_ppm / DROPOUT_SCALE,
            dense_units=dense,
            n_classes=n_classes,
        )
    except ValueError as e:
        raise ModelFileException(f"Model header describes an invalid architecture: {e}")

    n_values = _n_weights(arch) + 2 * n_epochs
    expected = PREAMBLE.size + HEADER.size + 8 * n_values + CHECKSUM.size
    if len(data) != expected:
        raise ModelFileException(
            f"Model file size ({len(data)} bytes) does not match its header ({expected} bytes)"
        )

    payload = memoryview(data)[PREAMBLE.size: -CHECKSUM.size]
    (stored,) = CHECKSUM.unpack_from(data, len(data) - CHECKSUM.size)
    if fnv1a_64(payload) != stored:
        raise ModelFileException("Model file checksum mismatch, the file is corrupted")

    values = np.frombuffer(payload, dtype="<f8", offset=HEADER.size).astype(np.float64)
    tensors, offset = {}, 0
    for name, shape in ModelWeights.shapes(arch).items():
        size = int(np.prod(shape))
        tensors[name] = values[offset: offset + size].reshape(shape).copy()
        offset += size

    history = [
        EpochRecord(epoch=i + 1, loss=float(values[offset + 2 * i]),
                    val_accuracy=float(values[offset + 2 * i + 1]))
        for i in range(n_epochs)
    ]

    return TrainedModel(
        architecture=arch, weights=ModelWeights(**tensors), history=history, best_epoch=best_epoch
    )


def save_model(model: TrainedModel, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(model))
    log.info(f"Saved model to {path}")


def load_model(path: Union[str, Path]) -> TrainedModel:
    return from_bytes(Path(path).read_bytes())
