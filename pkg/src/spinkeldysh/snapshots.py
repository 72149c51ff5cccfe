"""
Persistence of sampled path ensembles.

Snapshot file layout:

    b"SKSNAP01"                       8-byte magic
    <u4 little-endian>                length of the JSON header in bytes
    <JSON header>                     {"format": 1, "spec_hash", "contour", "seed",
                                       "n_chains", "n_samples", "n", "n_sites"}
    <records>                         packed (leg u1, slice u4, site u4, theta f8, phi f8)

Records run over (chain, sample, leg, slice, site) in C order; legs are 0, 1, 2
for +, -, E and slices are 1-based.
"""

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .contour import ContourParams
from .errors import ConfigParseError, DimensionMismatch
from .lattice import HamiltonianSpec, spec_hash

MAGIC = b"SKSNAP01"
FORMAT_VERSION = 1

RECORD_DTYPE = np.dtype(
    [("leg", "<u1"), ("slice", "<u4"), ("site", "<u4"), ("theta", "<f8"), ("phi", "<f8")]
)


@dataclass(frozen=True)
class SnapshotHeader:
    spec_hash: str
    contour: dict
    seed: str
    n_chains: int
    n_samples: int
    n: int
    n_sites: int
    format: int = FORMAT_VERSION

    @classmethod
    def for_run(cls, spec: HamiltonianSpec, contour: ContourParams, seed, n_chains: int, n_samples: int) -> "SnapshotHeader":
        # Seeds from fresh entropy exceed 64 bits, so they travel as strings.
        return cls(spec_hash(spec), contour.as_dict(), str(seed), n_chains, n_samples, contour.n, spec.n_sites)

    @property
    def n_records(self) -> int:
        return self.n_chains * self.n_samples * 3 * self.n * self.n_sites


def _records(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    records = np.empty(theta.size, dtype=RECORD_DTYPE)
    legs, slices, sites = np.indices(theta.shape[-3:])
    records["leg"] = np.broadcast_to(legs, theta.shape).ravel()
    records["slice"] = np.broadcast_to(slices + 1, theta.shape).ravel()
    records["site"] = np.broadcast_to(sites, theta.shape).ravel()
    records["theta"] = theta.ravel()
    records["phi"] = phi.ravel()
    return records


def write_snapshot(path, header: SnapshotHeader, theta: np.ndarray, phi: np.ndarray) -> Path:
    """Write angles of shape (chains, samples, 3, N, V) atomically.

    Args:
        path: Destination file.
        header: Metadata describing the run.
        theta: Polar angles.
        phi: Azimuthal angles.

    Returns:
        The path written.
    """
    path = Path(path)
    expected = (header.n_chains, header.n_samples, 3, header.n, header.n_sites)
    if theta.shape != expected or phi.shape != expected:
        raise DimensionMismatch(f"Snapshot arrays have shape {theta.shape}; header promises {expected}.")
    blob = json.dumps(asdict(header), sort_keys=True).encode("utf-8")
    tmp_path = path.with_name(path.name + ".tmp")
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(tmp_path, "wb") as f:
            f.write(MAGIC)
            f.write(np.uint32(len(blob)).astype("<u4").tobytes())
            f.write(blob)
            f.write(_records(theta, phi).tobytes())
        os.replace(tmp_path, path)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()
    return path


def read_header(path) -> tuple[SnapshotHeader, int]:
    """Header and byte offset of the first record."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            magic = f.read(len(MAGIC))
            size_bytes = f.read(4)
            if magic != MAGIC or len(size_bytes) != 4:
                raise ConfigParseError(f"{path} is not a spinkeldysh snapshot.")
            size = int(np.frombuffer(size_bytes, dtype="<u4")[0])
            data = json.loads(f.read(size).decode("utf-8"))
    except OSError as e:
        raise ConfigParseError(f"Cannot read snapshot {path}: {e}") from e
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigParseError(f"Snapshot {path} has a corrupted header: {e}") from e
    if not isinstance(data, dict) or data.get("format") != FORMAT_VERSION:
        raise ConfigParseError(f"Snapshot {path} has an unsupported header.")
    try:
        header = SnapshotHeader(**data)
    except TypeError as e:
        raise ConfigParseError(f"Snapshot {path} header is missing fields: {e}") from e
    return header, len(MAGIC) + 4 + size


def load_snapshot(path) -> tuple[SnapshotHeader, np.ndarray, np.ndarray]:
    """Header plus theta, phi arrays of shape (chains, samples, 3, N, V)."""
    header, offset = read_header(path)
    records = np.fromfile(path, dtype=RECORD_DTYPE, offset=offset)
    if records.size != header.n_records:
        raise ConfigParseError(
            f"Snapshot {path} holds {records.size} records; header promises {header.n_records}."
        )
    shape = (header.n_chains, header.n_samples, 3, header.n, header.n_sites)
    return header, records["theta"].reshape(shape), records["phi"].reshape(shape)
