"""Reference Dijkstra on structured lattices via scipy.sparse.csgraph.

Same contract as the compiled kernel: node (i, j, k) -> (i*nphi + j)*nt + k,
edge weights indexed by (i, k, stencil offset), collapsed pole fibres.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

_OFFSET = 1.0  # keeps source edges strictly positive


class CSRLattice:
    def __init__(self, nr, nphi, nt, di, dj, dk, weights, active, pole, phimode):
        self.n = n = nr * nphi * nt
        ii, jj, kk = np.meshgrid(np.arange(nr), np.arange(nphi), np.arange(nt), indexing="ij")
        ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
        idx = (ii * nphi + jj) * nt + kk

        # representative of each node after collapsing pole fibres
        rep = idx.copy()
        fib = pole[ii * nt + kk].astype(bool)
        rep[fib] = (ii[fib] * nphi + 0) * nt + kk[fib]
        self.rep = rep

        rows, cols, wts = [], [], []
        last = nphi - 1
        for s in range(len(di)):
            i2, j2, k2 = ii + di[s], jj + dj[s], kk + dk[s]
            ok = (i2 >= 0) & (i2 < nr) & (k2 >= 0) & (k2 < nt)
            if phimode == 1:
                j2 = np.mod(j2, nphi)
            elif phimode == 2:
                if last == 0:
                    j2 = np.zeros_like(j2)
                else:
                    j2 = np.where(j2 < 0, -j2, np.where(j2 > last, 2 * last - j2, j2))
                ok &= (j2 >= 0) & (j2 <= last)
            else:
                ok &= (j2 >= 0) & (j2 <= last)
            w = weights[ii, kk, s]
            ok &= np.isfinite(w)
            u = idx[ok]
            v = ((i2[ok] * nphi + j2[ok]) * nt + k2[ok])
            keep = active[u].astype(bool) & active[v].astype(bool)
            u, v, w = rep[u[keep]], rep[v[keep]], w[ok][keep]
            nz = u != v
            rows.append(u[nz])
            cols.append(v[nz])
            wts.append(w[nz])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        wts = np.concatenate(wts)
        # keep the lightest of parallel edges (csr would sum them)
        key = rows.astype(np.int64) * (n + 1) + cols
        order = np.lexsort((wts, key))
        key, rows, cols, wts = key[order], rows[order], cols[order], wts[order]
        first = np.ones(len(key), bool)
        first[1:] = key[1:] != key[:-1]
        rows, cols, wts = rows[first], cols[first], wts[first]
        g = csr_matrix((wts, (rows, cols)), shape=(n + 1, n + 1))
        g.sort_indices()
        self.indptr, self.indices, self.data = g.indptr, g.indices, g.data
        self.active = active.astype(bool)

    def solve(self, src, src_d):
        n = self.n
        src = np.asarray(src, dtype=np.int64)
        src_d = np.asarray(src_d, dtype=float)
        ok = (src >= 0) & (src < n)
        ok &= self.active[np.clip(src, 0, n - 1)]
        s_nodes, s_d = self.rep[src[ok]], src_d[ok] + _OFFSET
        order = np.argsort(s_nodes, kind="stable")
        indptr = self.indptr.copy()
        indptr[-1] = indptr[-2] + len(s_nodes)
        g = csr_matrix((np.concatenate([self.data, s_d[order]]),
                        np.concatenate([self.indices, s_nodes[order]]), indptr),
                       shape=(n + 1, n + 1))
        d = dijkstra(g, directed=True, indices=n)
        out = d[:n][self.rep] - _OFFSET
        out[~self.active] = np.inf
        return out
