"""Synthetic recovery instances."""

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.fft import dct
from scipy.linalg import hadamard

from ..dictionary import Dictionary, normalize_columns
from ..errors import ParameterError
from ..pursuit import SparseSignal
from .io import load_csv_matrix

VALUE_DISTS = ("gaussian", "uniform_pm1", "rademacher")
DICT_KINDS = ("gaussian_normalized", "incoherent", "from_file")
SIGNAL_KINDS = ("random", "phantom")


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for one instance ``y = Phi x + e``.

    ``noise_l2`` is the exact l2 norm of ``e``.  ``dict_kind="incoherent"``
    builds a rotated union of the identity and a Hadamard (or DCT) basis,
    coherence ``1/sqrt(N)`` (``sqrt(2/N)`` for DCT), which needs
    ``N <= d <= 2N``.  ``signal_kind="phantom"`` places ellipse outlines on a
    ``sqrt(d) x sqrt(d)`` image with 0-255 intensities instead of a uniformly
    drawn support.
    """

    N: int
    d: int
    k: int
    c: int = 1
    noise_l2: float = 0.0
    seed: int = 0
    value_dist: str = "gaussian"
    dict_kind: str = "gaussian_normalized"
    signal_kind: str = "random"
    dict_path: str = None

    def __post_init__(self):
        if min(self.N, self.d, self.c) < 1 or self.k < 0:
            raise ParameterError("N, d, c must be positive and k nonnegative")
        if self.k > self.d:
            raise ParameterError(f"k = {self.k} exceeds d = {self.d}")
        if self.noise_l2 < 0:
            raise ParameterError("noise_l2 must be nonnegative")
        if self.value_dist not in VALUE_DISTS:
            raise ParameterError(f"value_dist must be one of {VALUE_DISTS}")
        if self.dict_kind not in DICT_KINDS:
            raise ParameterError(f"dict_kind must be one of {DICT_KINDS}")
        if self.signal_kind not in SIGNAL_KINDS:
            raise ParameterError(f"signal_kind must be one of {SIGNAL_KINDS}")
        if self.dict_kind == "from_file" and not self.dict_path:
            raise ParameterError("dict_kind 'from_file' needs dict_path")

    def replace(self, **changes):
        return InstanceSpec(**{**asdict(self), **changes})


class Instance(NamedTuple):
    dictionary: Dictionary
    signal: SparseSignal
    y: np.ndarray
    noise: np.ndarray


def gaussian_dictionary(N, d, rng):
    return normalize_columns(rng.standard_normal((N, d)))


def incoherent_dictionary(N, d, rng):
    """Rotated ``[I | B_S]`` with ``B`` an orthonormal Hadamard/DCT basis.

    All ``N`` spikes plus ``d - N`` randomly chosen columns of ``B``; a
    random orthogonal rotation and column shuffle leave the coherence
    unchanged.
    """
    if not N <= d <= 2 * N:
        raise ParameterError(f"incoherent dictionaries need N <= d <= 2N, got N={N}, d={d}")
    if N & (N - 1) == 0:
        B = hadamard(N).astype(float) / math.sqrt(N)
    else:
        B = dct(np.eye(N), norm="ortho", axis=0)
    cols = rng.choice(N, size=d - N, replace=False)
    M = np.hstack([np.eye(N), B[:, np.sort(cols)]])
    U, R = np.linalg.qr(rng.standard_normal((N, N)))
    U *= np.sign(np.diag(R))
    M = U @ M
    M = M[:, rng.permutation(d)]
    return normalize_columns(M)


def phantom_image(side, k, rng, max_tries=200):
    """Ellipse outlines with 0-255 intensities and exactly ``k`` nonzeros.

    Outlines are drawn until at least ``k`` pixels are lit; the surplus is
    trimmed from the end in raster order.
    """
    if k > side * side:
        raise ParameterError(f"k = {k} exceeds the {side * side} pixels")
    img = np.zeros((side, side))
    yy, xx = np.mgrid[0:side, 0:side].astype(float)
    for _ in range(max_tries):
        if np.count_nonzero(img) >= k:
            break
        cx, cy = rng.uniform(0.2, 0.8, size=2) * side
        ax, ay = rng.uniform(0.08, 0.45, size=2) * side
        th = rng.uniform(0, math.pi)
        u = ((xx - cx) * math.cos(th) + (yy - cy) * math.sin(th)) / ax
        v = (-(xx - cx) * math.sin(th) + (yy - cy) * math.cos(th)) / ay
        rad = np.sqrt(u * u + v * v)
        rim = np.abs(rad - 1.0) * min(ax, ay) < 0.6
        img[rim] = rng.integers(64, 256)
    flat = img.reshape(-1)
    lit = np.flatnonzero(flat)
    if lit.size < k:
        # fall back to random pixels if the outlines could not light enough
        extra = rng.choice(np.flatnonzero(flat == 0), size=k - lit.size, replace=False)
        flat[extra] = rng.integers(64, 256, size=extra.size)
        lit = np.flatnonzero(flat)
    flat[lit[k:]] = 0.0
    return flat.reshape(side, side)


def _values(dist, k, rng):
    if dist == "gaussian":
        v = rng.standard_normal(k)
    elif dist == "uniform_pm1":
        v = rng.uniform(-1.0, 1.0, size=k)
    else:
        v = rng.choice([-1.0, 1.0], size=k)
    v[v == 0.0] = 1.0
    return v


def make_dictionary(spec, rng):
    if spec.dict_kind == "gaussian_normalized":
        D = gaussian_dictionary(spec.N, spec.d, rng)
    elif spec.dict_kind == "incoherent":
        D = incoherent_dictionary(spec.N, spec.d, rng)
    else:
        raw = load_csv_matrix(spec.dict_path)
        D = normalize_columns(raw)
    if D.shape != (spec.N, spec.d):
        raise ParameterError(f"dictionary has shape {D.shape}, spec asks for {(spec.N, spec.d)}")
    return D


def gen_instance(spec):
    """Build ``(dictionary, signal, y, noise)`` deterministically from ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    D = make_dictionary(spec, rng)
    if spec.signal_kind == "phantom":
        side = math.isqrt(spec.d)
        if side * side != spec.d:
            raise ParameterError(f"phantom signals need a square d, got {spec.d}")
        signal = SparseSignal.from_dense(phantom_image(side, spec.k, rng).reshape(-1))
    else:
        support = np.sort(rng.choice(spec.d, size=spec.k, replace=False))
        signal = SparseSignal(spec.d, tuple(support), _values(spec.value_dist, spec.k, rng))
    clean = D.matrix @ signal.to_dense()
    noise = np.zeros(spec.N)
    if spec.noise_l2 > 0:
        e = rng.standard_normal(spec.N)
        noise = e * (spec.noise_l2 / np.linalg.norm(e))
    return Instance(D, signal, clean + noise, noise)
