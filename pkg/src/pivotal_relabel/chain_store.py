"""Datasets and MCMC chains: containers, validation and NDJSON persistence.

Component labels in ``z`` are 1-based (``1..G``) everywhere they are visible
to callers, including on disk. Unit and iteration *positions* are ordinary
0-based numpy indices.

The on-disk chain format is newline-delimited JSON. The first line is a
header ``{"n": .., "G": .., "d": .., "H": ..}`` (plus optional ``meta`` and
``phi_layout``), followed by one record per iteration::

    {"iter": 1, "z": [1, 2, ...], "mu": [[..], ..], "pi": [..], "phi": [..]}

``iter`` starts at 1 and increases strictly. ``phi`` is omitted when the
chain carries no dispersion draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

PI_SUM_TOL = 1e-8

# how the flattened ``phi`` row is laid out
PHI_SHARED = "shared"
PHI_COMPONENT = "component"


class ChainFormatError(ValueError):
    """Raised when a chain file or array bundle violates the chain schema."""


@dataclass(frozen=True)
class Dataset:
    """Observed sample ``y`` as an ``(n, d)`` float array."""

    observations: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.observations, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[0] < 1 or y.shape[1] < 1:
            raise ValueError(f"observations must be (n, d) with n, d >= 1, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations contain non-finite values")
        y.setflags(write=False)
        object.__setattr__(self, "observations", y)

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def d(self) -> int:
        return self.observations.shape[1]


@dataclass(frozen=True, eq=False)
class MixtureChain:
    """Post burn-in MCMC draws of a finite mixture.

    Attributes
    ----------
    z : (H, n) int array
        Allocations, labels in ``1..G``.
    mu : (H, G, d) float array
        Component means.
    pi : (H, G) float array
        Component weights.
    phi : (H, p) float array or None
        Dispersion draws, flattened. With ``phi_layout == "component"`` the
        row is ``G`` equal blocks, one per component, so relabelling permutes
        them together with ``mu``. With ``"shared"`` it is copied unchanged.
    meta : dict
        Free-form provenance (seed, sampler, ...). ``meta["burnin_removed"]``
        is set by the samplers. ``meta["partial_weights"]`` marks chains whose
        weight rows legitimately sum to less than one because empty
        components were dropped by relabelling.
    """

    z: np.ndarray
    mu: np.ndarray
    pi: np.ndarray
    phi: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    phi_layout: str = PHI_SHARED

    def __post_init__(self):
        z = np.asarray(self.z)
        if z.dtype.kind not in "iu":
            if not np.all(np.isfinite(z)) or not np.all(z == np.round(z)):
                raise ChainFormatError("z must hold integer labels")
        z = z.astype(np.int64)
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim == 2:
            mu = mu[:, :, None]
        pi = np.asarray(self.pi, dtype=float)
        phi = None if self.phi is None else np.asarray(self.phi, dtype=float)
        if phi is not None and phi.ndim == 1:
            phi = phi[:, None]
        if z.ndim != 2 or mu.ndim != 3 or pi.ndim != 2:
            raise ChainFormatError(
                f"bad array ranks: z{z.shape} mu{mu.shape} pi{pi.shape}")
        H = z.shape[0]
        if mu.shape[0] != H or pi.shape[0] != H or (phi is not None and phi.shape[0] != H):
            raise ChainFormatError("arrays disagree on the number of iterations")
        if mu.shape[1] != pi.shape[1]:
            raise ChainFormatError(f"mu has {mu.shape[1]} components but pi has {pi.shape[1]}")
        if self.phi_layout not in (PHI_SHARED, PHI_COMPONENT):
            raise ChainFormatError(f"unknown phi_layout {self.phi_layout!r}")
        if phi is not None and self.phi_layout == PHI_COMPONENT and phi.shape[1] % mu.shape[1]:
            raise ChainFormatError("component phi width is not a multiple of G")
        for a in (z, mu, pi) + (() if phi is None else (phi,)):
            a.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def H(self) -> int:
        return self.z.shape[0]

    @property
    def n(self) -> int:
        return self.z.shape[1]

    @property
    def G(self) -> int:
        return self.mu.shape[1]

    @property
    def d(self) -> int:
        return self.mu.shape[2]

    def phi_blocks(self) -> np.ndarray | None:
        """Component-specific ``phi`` reshaped to ``(H, G, p // G)``."""
        if self.phi is None or self.phi_layout != PHI_COMPONENT:
            return None
        return self.phi.reshape(self.H, self.G, -1)

    def subset(self, iterations) -> "MixtureChain":
        """Chain restricted to the given 0-based iteration positions."""
        idx = np.asarray(iterations, dtype=np.int64)
        return MixtureChain(
            z=self.z[idx], mu=self.mu[idx], pi=self.pi[idx],
            phi=None if self.phi is None else self.phi[idx],
            meta=self.meta, phi_layout=self.phi_layout)

    def permute_labels(self, perms) -> "MixtureChain":
        """Apply one label permutation per iteration.

        ``perms[h]`` is a 0-based permutation array of length ``G``: old
        component ``k`` becomes new component ``perms[h][k]``. Allocations,
        means, weights and component-wise ``phi`` move together, so the
        result is the same posterior draw under different names.
        """
        perms = np.asarray(perms, dtype=np.int64)
        H, G = self.H, self.G
        if perms.shape != (H, G):
            raise ValueError(f"expected perms of shape {(H, G)}, got {perms.shape}")
        rows = np.arange(H)[:, None]
        inv = np.empty_like(perms)
        inv[rows, perms] = np.arange(G)[None, :]
        z = np.take_along_axis(perms, self.z - 1, axis=1) + 1
        mu = self.mu[rows, inv]
        pi = self.pi[rows, inv]
        phi = self.phi
        if phi is not None and self.phi_layout == PHI_COMPONENT:
            phi = self.phi_blocks()[rows, inv].reshape(H, -1)
        return MixtureChain(z=z, mu=mu, pi=pi, phi=phi, meta=self.meta,
                            phi_layout=self.phi_layout)

    def equals(self, other: "MixtureChain") -> bool:
        """Exact equality on every array and on metadata."""
        if not isinstance(other, MixtureChain):
            return False
        if (self.phi is None) != (other.phi is None):
            return False
        same = (np.array_equal(self.z, other.z) and np.array_equal(self.mu, other.mu)
                and np.array_equal(self.pi, other.pi) and self.phi_layout == other.phi_layout
                and self.meta == other.meta)
        if same and self.phi is not None:
            same = np.array_equal(self.phi, other.phi)
        return same


def validate_chain(chain: MixtureChain, n: int | None = None) -> list[str]:
    """Return human-readable violations of the chain invariants.

    An empty list means the chain is valid. Each message names the
    iteration (0-based ``h``) and field involved. ``n``, when given, is the
    unit count of the paired dataset.
    """
    problems = []
    G = chain.G
    bad = np.argwhere((chain.z < 1) | (chain.z > G))
    for h, i in bad[:50]:
        problems.append(f"z at h={h}, i={i}: label {int(chain.z[h, i])} outside 1..{G}")
    if len(bad) > 50:
        problems.append(f"... {len(bad) - 50} more labels out of range")

    for name in ("mu", "pi", "phi"):
        arr = getattr(chain, name)
        if arr is None:
            continue
        nonfinite = np.argwhere(~np.isfinite(arr.reshape(chain.H, -1)))
        for h, k in nonfinite[:20]:
            problems.append(f"{name} at h={h}: non-finite entry at flat position {k}")

    sums = chain.pi.sum(axis=1)
    if chain.meta.get("partial_weights"):
        off = np.flatnonzero(sums > 1 + PI_SUM_TOL)
    else:
        off = np.flatnonzero(np.abs(sums - 1) > PI_SUM_TOL)
    for h in off[:50]:
        problems.append(f"pi at h={h}: row sums to {float(sums[h])!r}, not 1")
    negative = np.argwhere(chain.pi < 0)
    for h, g in negative[:20]:
        problems.append(f"pi at h={h}, g={g + 1}: negative weight")

    if n is not None and chain.n != n:
        problems.append(f"z has {chain.n} columns but the dataset has {n} units")
    return problems


def _check(chain: MixtureChain) -> None:
    problems = validate_chain(chain)
    if problems:
        raise ChainFormatError("; ".join(problems[:5]))


def _real(x: float) -> float:
    # 17 significant digits round-trips any float64 exactly
    return float(f"{x:.17g}")


def _record(h: int, chain: MixtureChain) -> str:
    rec: dict[str, Any] = {
        "iter": h + 1,
        "z": chain.z[h].tolist(),
        "mu": [[_real(v) for v in row] for row in chain.mu[h]],
        "pi": [_real(v) for v in chain.pi[h]],
    }
    if chain.phi is not None:
        rec["phi"] = [_real(v) for v in chain.phi[h]]
    return json.dumps(rec, allow_nan=False)


def save_chain(chain: MixtureChain, path) -> None:
    """Write ``chain`` as NDJSON (header line, then one line per iteration)."""
    _check(chain)
    header = {"n": chain.n, "G": chain.G, "d": chain.d, "H": chain.H,
              "phi_layout": chain.phi_layout, "meta": chain.meta}
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, allow_nan=False, sort_keys=True) + "\n")
        for h in range(chain.H):
            fh.write(_record(h, chain) + "\n")


def _finite(values, where: str) -> None:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ChainFormatError(f"{where}: non-finite value")


def load_chain(path) -> MixtureChain:
    """Read and validate a chain written by :func:`save_chain`."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise ChainFormatError(f"{path}: empty file, no header record")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ChainFormatError(f"record 0 (header): invalid JSON: {exc}") from None
    for key in ("n", "G", "d", "H"):
        if not isinstance(header.get(key), int) or header[key] < 0:
            raise ChainFormatError(f"record 0 (header): field {key!r} missing or not a count")
    n, G, d, H = header["n"], header["G"], header["d"], header["H"]
    if len(lines) - 1 != H:
        raise ChainFormatError(f"header declares H={H} but file has {len(lines) - 1} records")

    z = np.empty((H, n), dtype=np.int64)
    mu = np.empty((H, G, d))
    pi = np.empty((H, G))
    phi_rows = []
    has_phi = None
    for k, line in enumerate(lines[1:], start=1):
        where = f"record {k}"
        try:
            rec = json.loads(line, parse_constant=lambda c: float(c))
        except json.JSONDecodeError as exc:
            raise ChainFormatError(f"{where}: invalid JSON: {exc}") from None
        if rec.get("iter") != k:
            raise ChainFormatError(f"{where}: field 'iter' is {rec.get('iter')!r}, expected {k}")
        for key in ("z", "mu", "pi"):
            if key not in rec:
                raise ChainFormatError(f"{where}: missing field {key!r}")
        zr = rec["z"]
        if len(zr) != n or not all(isinstance(v, int) and not isinstance(v, bool) for v in zr):
            raise ChainFormatError(f"{where}: field 'z' must be {n} integers")
        for i, v in enumerate(zr):
            if not 1 <= v <= G:
                raise ChainFormatError(f"{where}: field 'z'[{i}] = {v}: label out of range 1..{G}")
        try:
            mur = np.asarray(rec["mu"], dtype=float)
            pir = np.asarray(rec["pi"], dtype=float)
        except (TypeError, ValueError):
            raise ChainFormatError(f"{where}: fields 'mu'/'pi' must be numeric arrays") from None
        if mur.shape != (G, d):
            raise ChainFormatError(f"{where}: field 'mu' has shape {mur.shape}, expected {(G, d)}")
        if pir.shape != (G,):
            raise ChainFormatError(f"{where}: field 'pi' has shape {pir.shape}, expected {(G,)}")
        _finite(mur, f"{where}: field 'mu'")
        _finite(pir, f"{where}: field 'pi'")
        rec_has_phi = "phi" in rec
        if has_phi is None:
            has_phi = rec_has_phi
        elif has_phi != rec_has_phi:
            raise ChainFormatError(f"{where}: field 'phi' present in some records only")
        if rec_has_phi:
            phr = np.asarray(rec["phi"], dtype=float)
            if phr.ndim != 1 or (phi_rows and phr.shape != phi_rows[0].shape):
                raise ChainFormatError(f"{where}: field 'phi' has inconsistent shape {phr.shape}")
            _finite(phr, f"{where}: field 'phi'")
            phi_rows.append(phr)
        z[k - 1] = zr
        mu[k - 1] = mur
        pi[k - 1] = pir

    phi = np.vstack(phi_rows) if phi_rows else None
    chain = MixtureChain(z=z, mu=mu, pi=pi, phi=phi, meta=header.get("meta", {}),
                         phi_layout=header.get("phi_layout", PHI_SHARED))
    _check(chain)
    return chain


def save_dataset(data: Dataset, path, true_labels=None) -> None:
    """CSV with columns ``y1..yd`` and, optionally, ``true_label``."""
    cols = [f"y{j + 1}" for j in range(data.d)]
    if true_labels is not None:
        cols.append("true_label")
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i, row in enumerate(data.observations):
            vals = [repr(float(v)) for v in row]
            if true_labels is not None:
                vals.append(str(int(true_labels[i])))
            fh.write(",".join(vals) + "\n")


def load_dataset(path) -> tuple[Dataset, np.ndarray | None]:
    """Read a dataset CSV; returns ``(dataset, true_labels or None)``.

    A file without a header row is accepted as plain numeric columns.
    """
    with Path(path).open("r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    has_header = any(c.isalpha() for c in first.replace("e", "").replace("E", ""))
    arr = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    labels = None
    if has_header and first.split(",")[-1].strip() == "true_label":
        labels = arr[:, -1].astype(np.int64)
        arr = arr[:, :-1]
    return Dataset(arr), labels
