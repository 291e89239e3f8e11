"""Truncated Fourier mode lattice on the n-torus.

A field stores complex amplitudes ``v[i, α]`` for components ``i`` and
lattice indices ``α ∈ [-M, M]^n`` in a dense array of shape
``(ncomp, 2M+1, ..., 2M+1)``; the lattice index ``α`` lives at array
position ``α + M``.  Entries that are not stored are zero by construction.

Products that leave the window are dropped (sharp Galerkin truncation).
"""
from __future__ import annotations

import dataclasses
import functools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

TOL_DIV = 1e-12


@functools.lru_cache(maxsize=64)
def _wavevectors(n: int, M: int) -> np.ndarray:
    axis = np.arange(-M, M + 1)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    out = np.stack(grids).astype(np.int64)
    out.setflags(write=False)
    return out


def wavevectors(n: int, M: int) -> np.ndarray:
    """Integer lattice indices, shape ``(n, 2M+1, ..., 2M+1)``."""
    return _wavevectors(n, M)


@functools.lru_cache(maxsize=64)
def _norm_sq(n: int, M: int) -> np.ndarray:
    out = np.sum(_wavevectors(n, M) ** 2, axis=0).astype(float)
    out.setflags(write=False)
    return out


def mode_norm_sq(n: int, M: int) -> np.ndarray:
    """``|α|^2`` on the lattice."""
    return _norm_sq(n, M)


def mode_norm(n: int, M: int) -> np.ndarray:
    """Euclidean ``|α|`` on the lattice."""
    return np.sqrt(_norm_sq(n, M))


def lattice_size(n: int, M: int) -> int:
    return (2 * M + 1) ** n


def reflect(amps: np.ndarray, n: int) -> np.ndarray:
    """Map ``a[..., α] -> a[..., -α]`` over the trailing ``n`` lattice axes."""
    lead = amps.ndim - n
    return amps[(slice(None),) * lead + (slice(None, None, -1),) * n]


@dataclass(frozen=True, eq=False)
class ModeField:
    """Complex Fourier amplitudes on a cubic truncated lattice.

    Parameters
    ----------
    amps : ndarray, shape (ncomp, 2M+1, ..., 2M+1)
        Amplitudes; the number of trailing axes is the dimension ``n``.
    l : float
        Torus side length.
    real_valued, solenoidal : bool
        Structural flags.  They are claims about the data, checked by
        :meth:`reality_defect` and :func:`divergence`.
    """

    amps: np.ndarray
    l: float = 1.0
    real_valued: bool = False
    solenoidal: bool = False

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.ndim < 2:
            raise ConfigurationError("amps needs a component axis and >= 1 lattice axis")
        side = amps.shape[1]
        if side % 2 != 1 or any(d != side for d in amps.shape[1:]):
            raise ConfigurationError(f"non-cubic or even lattice shape {amps.shape[1:]}")
        if not self.l > 0:
            raise ConfigurationError("torus length must be positive")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def zeros(cls, n, M, ncomp=None, l=1.0, **flags):
        ncomp = n if ncomp is None else ncomp
        return cls(np.zeros((ncomp,) + (2 * M + 1,) * n, dtype=complex), l=l, **flags)

    @property
    def n(self) -> int:
        return self.amps.ndim - 1

    @property
    def M(self) -> int:
        return (self.amps.shape[1] - 1) // 2

    @property
    def ncomp(self) -> int:
        return self.amps.shape[0]

    @property
    def lattice_key(self):
        return (self.n, self.M, float(self.l))

    def replace(self, amps=None, **changes) -> "ModeField":
        if amps is not None:
            changes["amps"] = amps
        return dataclasses.replace(self, **changes)

    def index(self, alpha) -> tuple:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.n or any(abs(a) > self.M for a in alpha):
            raise ConfigurationError(f"index {alpha} not on lattice n={self.n}, M={self.M}")
        return tuple(a + self.M for a in alpha)

    def amplitude(self, i, alpha) -> complex:
        return complex(self.amps[(i,) + self.index(alpha)])

    def with_entry(self, i, alpha, value) -> "ModeField":
        amps = self.amps.copy()
        amps[(i,) + self.index(alpha)] = value
        return self.replace(amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.amps))) if self.amps.size else 0.0

    def reality_defect(self) -> float:
        """``max |v_{i,-α} - conj(v_{iα})|``."""
        return float(np.max(np.abs(reflect(self.amps, self.n) - np.conj(self.amps))))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.amps)))

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        entries = []
        for idx in zip(*np.nonzero(self.amps)):
            value = self.amps[idx]
            entries.append(
                {
                    "i": int(idx[0]),
                    "alpha": [int(k) - self.M for k in idx[1:]],
                    "re": float(value.real),
                    "im": float(value.imag),
                }
            )
        out = {
            "n": self.n,
            "M": self.M,
            "l": float(self.l),
            "flags": {"real_valued": self.real_valued, "solenoidal": self.solenoidal},
            "entries": entries,
        }
        if self.ncomp != self.n:
            out["components"] = self.ncomp
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModeField":
        n, M = int(data["n"]), int(data["M"])
        flags = data.get("flags", {})
        field = cls.zeros(
            n, M, ncomp=int(data.get("components", n)), l=float(data.get("l", 1.0)),
            real_valued=bool(flags.get("real_valued", False)),
            solenoidal=bool(flags.get("solenoidal", False)),
        )
        amps = field.amps.copy()
        for e in data["entries"]:
            amps[(int(e["i"]),) + field.index(e["alpha"])] = complex(e["re"], e["im"])
        return field.replace(amps)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModeField":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def load(cls, path) -> "ModeField":
        return cls.from_json(Path(path).read_text())


def check_same_lattice(*fields: ModeField) -> None:
    keys = {f.lattice_key for f in fields}
    if len(keys) != 1:
        raise ConfigurationError(f"lattice mismatch: {sorted(keys)}")


@dataclass(frozen=True)
class DecayEnvelope:
    """Pointwise bound ``|v_{iα}| <= C / (1 + |α|^s)``."""

    C: float
    s: float

    def __post_init__(self):
        if not (self.C > 0 and self.s >= 0):
            raise ConfigurationError(f"invalid envelope C={self.C}, s={self.s}")

    def bound(self, n: int, M: int) -> np.ndarray:
        return self.C / (1.0 + mode_norm(n, M) ** self.s)

    def ratios(self, field: ModeField) -> np.ndarray:
        """``|v_{iα}|`` divided by the bound at ``α``."""
        return np.abs(field.amps) / self.bound(field.n, field.M)

    def margin(self, field: ModeField) -> float:
        """``min bound/|v|`` over nonzero amplitudes; ``inf`` for a zero field."""
        r = float(np.max(self.ratios(field)))
        return np.inf if r == 0.0 else 1.0 / r

    def satisfied(self, field: ModeField, rtol: float = 1e-12) -> bool:
        return bool(np.max(self.ratios(field)) <= 1.0 + rtol)

    def to_dict(self) -> dict:
        return {"C": float(self.C), "s": float(self.s)}


# -- convolution ---------------------------------------------------------

def _lattice_params(a: np.ndarray) -> tuple[int, int]:
    return a.ndim, (a.shape[0] - 1) // 2


def _convolve_direct(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, M = _lattice_params(a)
    side = 2 * M + 1
    out = np.zeros(a.shape, dtype=np.result_type(a, b, complex))
    for g in np.argwhere(b != 0):
        off = g - M
        out_sl = tuple(slice(max(0, o), min(side, side + o)) for o in off)
        a_sl = tuple(slice(max(0, -o), min(side, side - o)) for o in off)
        out[out_sl] += b[tuple(g)] * a[a_sl]
    return out


def fft_pad(a: np.ndarray, n: int) -> np.ndarray:
    """Forward FFT of lattice arrays (last ``n`` axes) padded for linear convolution."""
    side = a.shape[-1]
    size = 2 * side - 1
    return np.fft.fftn(a, s=(size,) * n, axes=tuple(range(-n, 0)))


def fft_crop(spec: np.ndarray, n: int, M: int) -> np.ndarray:
    """Inverse of :func:`fft_pad` products, cropped back to ``[-M, M]^n``."""
    full = np.fft.ifftn(spec, axes=tuple(range(-n, 0)))
    lead = full.ndim - n
    return full[(slice(None),) * lead + (slice(M, 3 * M + 1),) * n]


def _convolve_fft(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, M = _lattice_params(a)
    return fft_crop(fft_pad(a, n) * fft_pad(b, n), n, M)


def convolve(a, b, method: str = "direct"):
    """Truncated lattice convolution ``out_α = Σ_γ a_{α-γ} b_γ``.

    Only pairs with both ``γ`` and ``α - γ`` on the lattice contribute and
    ``out`` is restricted to the same window.  ``a`` and ``b`` are lattice
    arrays or single-component :class:`ModeField` objects.

    ``method="direct"`` is the O(lattice^2) reference sum; ``"fft"`` is a
    zero-padded FFT evaluation of the same finite sum (no aliasing).
    """
    fields = [x for x in (a, b) if isinstance(x, ModeField)]
    if fields:
        check_same_lattice(*fields)
    arr_a = a.amps[0] if isinstance(a, ModeField) else np.asarray(a)
    arr_b = b.amps[0] if isinstance(b, ModeField) else np.asarray(b)
    if arr_a.shape != arr_b.shape:
        raise ConfigurationError(f"lattice mismatch: {arr_a.shape} vs {arr_b.shape}")
    if method == "direct":
        out = _convolve_direct(arr_a, arr_b)
    elif method == "fft":
        out = _convolve_fft(arr_a, arr_b)
    else:
        raise ConfigurationError(f"unknown convolution method {method!r}")
    if fields:
        return fields[0].replace(out[None], real_valued=False, solenoidal=False)
    return out


# -- structure -------------------------------------------------------------

def leray_project(v: ModeField) -> ModeField:
    """Apply ``P(α) = I - α α^T / |α|^2`` mode by mode; ``α = 0`` is untouched."""
    if v.n < 2:
        raise ConfigurationError("Leray projection needs n >= 2")
    if v.ncomp != v.n:
        raise ConfigurationError("Leray projection needs an n-component field")
    k = wavevectors(v.n, v.M).astype(float)
    k2 = mode_norm_sq(v.n, v.M)
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    kdotv = np.sum(k * v.amps, axis=0)
    return v.replace(v.amps - k * (kdotv * inv), solenoidal=True)


def divergence(v: ModeField) -> np.ndarray:
    """Scalar mode map ``d_α = Σ_j (2πi α_j / l) v_{jα}``."""
    k = wavevectors(v.n, v.M)
    return np.sum((2j * np.pi / v.l) * k * v.amps, axis=0)


def max_divergence(v: ModeField) -> float:
    return float(np.max(np.abs(divergence(v))))


def hs_weights(n: int, M: int, s: float) -> np.ndarray:
    """``1 + |α|^{2s}`` on the lattice for ``s > 0``; all ones at ``s = 0``.

    ``|0|^{2s}`` is taken as 0, so the zero mode always has weight 1.
    """
    if s == 0:
        return np.ones((2 * M + 1,) * n)
    return 1.0 + mode_norm(n, M) ** (2.0 * s)


def hs_norm(v: ModeField, s: float) -> float:
    """Dual Sobolev norm ``sqrt(Σ_{i,α} (1 + |α|^{2s}) |v_{iα}|^2)``; plain l2 at ``s = 0``."""
    if not np.isfinite(s):
        raise ConfigurationError("s must be finite")
    w = hs_weights(v.n, v.M, s)
    return float(np.sqrt(np.sum(w * np.abs(v.amps) ** 2)))


def symmetrize_reality(v: ModeField) -> ModeField:
    """Average with the conjugate reflection so that ``v_{-α} = conj(v_α)``."""
    sym = 0.5 * (v.amps + np.conj(reflect(v.amps, v.n)))
    return v.replace(sym, real_valued=True)


def envelope_field(
    n, M, C, s, rng, *, l=1.0, real=True, solenoidal=True, zero_mean=False, ncomp=None
) -> ModeField:
    """Random-phase field whose largest component per mode sits on ``C/(1+|α|^s)``.

    Phases come from ``rng``; the field is reality-symmetrized and
    Leray-projected when requested, then each mode is rescaled so that
    ``max_i |v_{iα}|`` equals the envelope value.
    """
    ncomp = n if ncomp is None else ncomp
    shape = (ncomp,) + (2 * M + 1,) * n
    phases = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    mags = rng.uniform(0.5, 1.0, size=shape)
    field = ModeField(mags * np.exp(1j * phases), l=l)
    if real:
        field = symmetrize_reality(field)
    if solenoidal and n >= 2 and ncomp == n:
        field = leray_project(field)
    env = DecayEnvelope(C, s).bound(n, M)
    peak = np.max(np.abs(field.amps), axis=0)
    scale = np.divide(env, peak, out=np.zeros_like(peak), where=peak > 0)
    amps = field.amps * scale
    if zero_mean:
        amps[(slice(None),) + (M,) * n] = 0.0
    return field.replace(amps, real_valued=real, solenoidal=solenoidal and n >= 2)
