"""Backend selection for the lattice Dijkstra kernel.

The compiled extension is used when importable; set GHFLAT_BACKEND=python
to force the scipy fallback.
"""

from __future__ import annotations

import os

import numpy as np

from ._fallback import CSRLattice

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

BACKEND = "cython" if (_core is not None and os.environ.get("GHFLAT_BACKEND") != "python") else "python"

PHI_CLIP, PHI_PERIODIC, PHI_MIRROR = 0, 1, 2


class LatticeGraph:
    """Structured graph on an (nr, nphi, nt) lattice; immutable once built.

    weights[i, k, s] is the length of the edge from (i, j, k) along offset s.
    The same instance may be solved from many sources concurrently.
    """

    def __init__(self, nr, nphi, nt, offsets, weights, active, pole, phimode, backend=None):
        self.nr, self.nphi, self.nt = int(nr), int(nphi), int(nt)
        off = np.asarray(offsets, dtype=np.int64).reshape(-1, 3)
        self.di = np.ascontiguousarray(off[:, 0])
        self.dj = np.ascontiguousarray(off[:, 1])
        self.dk = np.ascontiguousarray(off[:, 2])
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        if self.weights.shape != (self.nr, self.nt, len(off)):
            raise ValueError("weights must have shape (nr, nt, n_offsets)")
        self.active = np.ascontiguousarray(active, dtype=np.uint8).ravel()
        self.pole = np.ascontiguousarray(pole, dtype=np.uint8).ravel()
        self.phimode = int(phimode)
        self.backend = backend or BACKEND
        if self.backend == "cython" and _core is None:
            raise RuntimeError("compiled kernel not available")
        self._csr = None

    @property
    def size(self):
        return self.nr * self.nphi * self.nt

    def index(self, i, j, k=0):
        return (np.asarray(i) * self.nphi + np.asarray(j)) * self.nt + np.asarray(k)

    def solve(self, src, src_d=None, stop=()):
        src = np.ascontiguousarray(np.atleast_1d(src), dtype=np.int64)
        src_d = (np.zeros(len(src)) if src_d is None
                 else np.ascontiguousarray(np.atleast_1d(src_d), dtype=np.float64))
        if self.backend == "cython":
            stop = np.ascontiguousarray(np.atleast_1d(np.asarray(stop, dtype=np.int64)))
            return _core.dijkstra_lattice(self.nr, self.nphi, self.nt, self.di, self.dj, self.dk,
                                          self.weights, self.active, self.pole, self.phimode,
                                          src, src_d, stop)
        if self._csr is None:
            self._csr = CSRLattice(self.nr, self.nphi, self.nt, self.di, self.dj, self.dk,
                                   self.weights, self.active, self.pole, self.phimode)
        return self._csr.solve(src, src_d)

    def with_active(self, active) -> "LatticeGraph":
        return LatticeGraph(self.nr, self.nphi, self.nt, np.stack([self.di, self.dj, self.dk], 1),
                            self.weights, active, self.pole, self.phimode, self.backend)
