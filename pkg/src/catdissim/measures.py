"""Build a :class:`BlockDiagonalDelta` from a :class:`MeasureSpec`."""
from __future__ import annotations

from typing import Sequence

from . import independent
from .association import build_delta_association, build_delta_supervised
from .cooccur import build_cooccurrence
from .dataset import CategoricalDataset, append_response
from .delta import BlockDiagonalDelta, MeasureSpec
from .errors import DataError

_SCHEMA_ONLY = ("matching", "eskin", "ordered")


def parse_measures(text: str) -> list[MeasureSpec]:
    return [MeasureSpec(m.strip()) for m in text.split(",") if m.strip()]


def build_delta(
    spec: MeasureSpec | str,
    ds: CategoricalDataset,
    labels: Sequence | None = None,
) -> BlockDiagonalDelta:
    """Estimate ``Delta`` for ``spec`` on ``ds`` (the training rows).

    Supervised measures need ``labels`` (one per row of ``ds``).
    """
    if isinstance(spec, str):
        spec = MeasureSpec(spec)
    ds = ds.without_response()
    m = spec.measure

    if spec.is_supervised:
        if labels is None:
            raise DataError(f"measure {m!r} needs class labels")
        delta = build_delta_supervised(
            append_response(ds, labels), spec.divergence, spec.supervised_mode, **_phi_params(spec)
        )
        return BlockDiagonalDelta(delta.blocks, spec, delta.source)

    if m in _SCHEMA_ONLY:
        if m == "matching":
            delta = independent.build_matching(ds.variables)
        elif m == "eskin":
            delta = independent.build_eskin(ds.variables)
        else:
            delta = independent.build_ordered(ds.variables, spec.scores)
        return BlockDiagonalDelta(delta.blocks, spec, None)

    model = build_cooccurrence(ds)
    marg = model.marginals
    if m == "lin":
        delta = independent.build_lin(marg, spec.lin_guard)
    elif m == "iof":
        delta = independent.build_iof(marg)
    elif m == "of":
        delta = independent.build_of(marg)
    elif m.startswith("goodall"):
        delta = independent.build_goodall(marg, int(m[-1]))
    elif m in ("ve", "vm"):
        delta = independent.build_variability(marg, m.upper())
    else:
        phi = spec.custom_phi if m == "custom" else m
        weights = "ones" if spec.weights is None else spec.weights
        delta = build_delta_association(model, phi, weights, **_phi_params(spec))
    return BlockDiagonalDelta(delta.blocks, spec, ds.fingerprint)


def _phi_params(spec: MeasureSpec) -> dict:
    if spec.divergence == "kl":
        return {"floor": spec.kl_floor, "directed": spec.kl_directed}
    return {}
