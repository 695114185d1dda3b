"""Category dissimilarity blocks and the block-diagonal ``Delta`` they form."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, UsageError

SYMMETRY_TOL = 1e-12

INDEPENDENT_MEASURES = (
    "matching", "eskin", "lin", "iof", "of",
    "goodall1", "goodall2", "goodall3", "goodall4", "ve", "vm", "ordered",
)
ASSOCIATION_MEASURES = ("tvd", "kl", "chisq")
SUPERVISED_MEASURES = tuple(
    f"supervised_{mode}{phi}" for mode in ("", "full_") for phi in ASSOCIATION_MEASURES
)
MEASURES = INDEPENDENT_MEASURES + ASSOCIATION_MEASURES + SUPERVISED_MEASURES + ("custom",)


@dataclass(frozen=True, eq=False)
class DeltaBlock:
    """Dissimilarities between the levels of one variable.

    Rows and columns of levels that were not observed in the data the block was
    built from hold NaN; ``defined`` marks the usable levels.
    """

    variable: int
    name: str
    values: np.ndarray
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DataError(f"block {self.name!r} must be square, got shape {v.shape}")
        d = self.defined_mask(v)
        sub = v[np.ix_(d, d)]
        if not np.isfinite(sub).all():
            raise DataError(f"block {self.name!r}: non-finite dissimilarity")
        if (sub < 0).any():
            raise DataError(f"block {self.name!r}: negative dissimilarity")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @staticmethod
    def defined_mask(v: np.ndarray) -> np.ndarray:
        return ~np.isnan(np.diagonal(v))

    @property
    def defined(self) -> np.ndarray:
        return self.defined_mask(self.values)

    @property
    def order(self) -> int:
        return self.values.shape[0]

    def observed_part(self) -> np.ndarray:
        d = self.defined
        return self.values[np.ix_(d, d)]

    @property
    def symmetric(self) -> bool:
        sub = self.observed_part()
        return bool(np.all(np.abs(sub - sub.T) <= SYMMETRY_TOL))

    @property
    def zero_diagonal(self) -> bool:
        return bool(np.all(np.abs(np.diagonal(self.observed_part())) <= SYMMETRY_TOL))

    def max_fill(self) -> np.ndarray:
        """Copy with undefined rows/columns set to the largest defined off-diagonal
        value and a zero diagonal."""
        d = self.defined
        if d.all():
            return self.values
        sub = self.observed_part()
        off = sub[~np.eye(sub.shape[0], dtype=bool)]
        fill = off.max() if off.size else 0.0
        out = self.values.copy()
        out[~d, :] = fill
        out[:, ~d] = fill
        idx = np.flatnonzero(~d)
        out[idx, idx] = 0.0
        return out


@dataclass(frozen=True)
class MeasureSpec:
    """Declarative choice of a dissimilarity measure and its parameters.

    ``weights`` is a preset name (``"ones"``, ``"mean"``) or a square nested
    sequence; it applies to association measures only. ``lin_guard`` is 0
    (singular Lin denominators raise), a positive clamp, or ``"auto"`` for
    ``1/(2n)``. ``scores`` holds per-variable level scores for ``ordered``.
    """

    measure: str
    weights: str | tuple[tuple[float, ...], ...] | None = None
    lin_guard: float | str = 0.0
    kl_floor: float = 1e-10
    kl_directed: bool = False
    scores: tuple[tuple[float, ...] | None, ...] | None = None
    custom_phi: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise UsageError(f"unknown measure {self.measure!r}; choose from {', '.join(MEASURES)}")
        if self.measure == "custom" and self.custom_phi is None:
            raise UsageError("measure 'custom' needs a custom_phi divergence")
        w = self.weights
        if w is not None and not isinstance(w, str):
            arr = np.asarray(w, dtype=float)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise UsageError("weights must be a square matrix")
            if not np.isfinite(arr).all() or (arr < 0).any():
                raise UsageError("weights must be finite and non-negative")
            object.__setattr__(self, "weights", tuple(tuple(float(x) for x in r) for r in arr))
        elif isinstance(w, str) and w not in ("ones", "mean"):
            raise UsageError(f"unknown weight preset {w!r}")
        if isinstance(self.lin_guard, str):
            if self.lin_guard != "auto":
                raise UsageError("lin_guard must be a number or 'auto'")
        elif not 0 <= self.lin_guard < 1:
            raise UsageError("lin_guard must lie in [0, 1)")
        if self.kl_floor < 0:
            raise UsageError("kl_floor must be non-negative")
        if self.scores is not None:
            object.__setattr__(
                self, "scores",
                tuple(None if s is None else tuple(float(x) for x in s) for s in self.scores),
            )

    @property
    def is_association(self) -> bool:
        return self.measure in ASSOCIATION_MEASURES + SUPERVISED_MEASURES + ("custom",)

    @property
    def is_supervised(self) -> bool:
        return self.measure in SUPERVISED_MEASURES

    @property
    def divergence(self) -> str | None:
        """Name of the profile divergence of an association measure."""
        if self.measure in ASSOCIATION_MEASURES:
            return self.measure
        if self.is_supervised:
            return self.measure.rsplit("_", 1)[1]
        return None

    @property
    def supervised_mode(self) -> str | None:
        if not self.is_supervised:
            return None
        return "full" if self.measure.startswith("supervised_full_") else "supervised"

    def to_dict(self) -> dict:
        d = {
            "measure": self.measure,
            "weights": self.weights if self.weights is None or isinstance(self.weights, str)
            else [list(r) for r in self.weights],
            "lin_guard": self.lin_guard,
            "kl_floor": self.kl_floor,
            "kl_directed": self.kl_directed,
            "scores": None if self.scores is None else [None if s is None else list(s) for s in self.scores],
        }
        if self.custom_phi is not None:
            d["custom_phi"] = getattr(self.custom_phi, "name", repr(self.custom_phi))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MeasureSpec":
        d = {k: v for k, v in d.items() if k != "custom_phi"}
        if d.get("scores") is not None:
            d["scores"] = tuple(None if s is None else tuple(s) for s in d["scores"])
        return cls(**d)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class BlockDiagonalDelta:
    """The block-diagonal matrix ``Delta``: one :class:`DeltaBlock` per variable.

    ``source`` is the fingerprint of the dataset the data-dependent blocks were
    estimated on (None for measures that only use the schema).
    """

    blocks: tuple[DeltaBlock, ...]
    spec: MeasureSpec | None = None
    source: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @classmethod
    def from_matrices(cls, matrices: Sequence, names: Sequence[str] | None = None, **kw) -> "BlockDiagonalDelta":
        names = names or [f"V{j + 1}" for j in range(len(matrices))]
        return cls(tuple(DeltaBlock(j, names[j], m) for j, m in enumerate(matrices)), **kw)

    def __len__(self):
        return len(self.blocks)

    def __getitem__(self, j) -> DeltaBlock:
        return self.blocks[j]

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(b.order for b in self.blocks)

    @property
    def symmetric(self) -> bool:
        return all(b.symmetric for b in self.blocks)

    @property
    def zero_diagonal(self) -> bool:
        return all(b.zero_diagonal for b in self.blocks)

    @property
    def complete(self) -> bool:
        return all(b.defined.all() for b in self.blocks)

    def scaled(self, c: float) -> "BlockDiagonalDelta":
        if c < 0:
            raise DataError("scale factor must be non-negative")
        return replace(self, blocks=tuple(replace(b, values=b.values * c) for b in self.blocks))

    def dense(self, fill: bool = True) -> np.ndarray:
        """The ``Q* x Q*`` matrix; undefined entries are max-filled when ``fill``."""
        from scipy.linalg import block_diag

        mats = [b.max_fill() if fill else b.values for b in self.blocks]
        return block_diag(*mats) if mats else np.zeros((0, 0))

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update((self.spec.fingerprint if self.spec else "none").encode())
        h.update((self.source or "").encode())
        for b in self.blocks:
            h.update(np.nan_to_num(b.values, nan=-1.0).astype("<f8").tobytes())
        return h.hexdigest()[:16]

    def manifest(self) -> dict:
        return {
            "spec": self.spec.to_dict() if self.spec else None,
            "source": self.source,
            "blocks": [
                {
                    "variable": b.variable,
                    "name": b.name,
                    "levels": list(b.levels),
                    "order": b.order,
                    "symmetric": b.symmetric,
                    "zero_diagonal": b.zero_diagonal,
                    "undefined_levels": np.flatnonzero(~b.defined).tolist(),
                }
                for b in self.blocks
            ],
        }

    def write_csv(self, directory) -> list[Path]:
        """One CSV per block (level labels as header and first column) plus
        ``delta_manifest.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for b in self.blocks:
            levels = list(b.levels) or [str(i) for i in range(b.order)]
            path = directory / f"delta_{b.variable:03d}_{_safe(b.name)}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([""] + levels)
                for lv, row in zip(levels, b.values):
                    w.writerow([lv] + [format_float(x) for x in row])
            paths.append(path)
        manifest = self.manifest()
        manifest["files"] = [p.name for p in paths]
        mpath = directory / "delta_manifest.json"
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return paths + [mpath]


def format_float(x: float) -> str:
    if np.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)
