# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dijkstra kernel on structured (r, phi, t) lattices.

Node (i, j, k) has flat index (i*nphi + j)*nt + k.  Edge weights depend
only on (i, k, stencil offset), so they come in as a precomputed table.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()


cdef struct Heap:
    double *key
    long *node
    long size
    long cap


cdef int heap_init(Heap *hp, long cap) noexcept nogil:
    hp.key = <double *> malloc(cap * sizeof(double))
    hp.node = <long *> malloc(cap * sizeof(long))
    hp.size = 0
    hp.cap = cap
    return 0 if (hp.key != NULL and hp.node != NULL) else -1


cdef void heap_free(Heap *hp) noexcept nogil:
    free(hp.key)
    free(hp.node)


cdef int heap_push(Heap *hp, double key, long node) noexcept nogil:
    cdef long pos, parent
    cdef double *nk
    cdef long *nn
    if hp.size == hp.cap:
        nk = <double *> realloc(hp.key, 2 * hp.cap * sizeof(double))
        if nk == NULL:
            return -1
        hp.key = nk
        nn = <long *> realloc(hp.node, 2 * hp.cap * sizeof(long))
        if nn == NULL:
            return -1
        hp.node = nn
        hp.cap *= 2
    pos = hp.size
    hp.size += 1
    while pos > 0:
        parent = (pos - 1) >> 1
        if hp.key[parent] <= key:
            break
        hp.key[pos] = hp.key[parent]
        hp.node[pos] = hp.node[parent]
        pos = parent
    hp.key[pos] = key
    hp.node[pos] = node
    return 0


cdef void heap_pop(Heap *hp, double *key, long *node) noexcept nogil:
    cdef long pos = 0, child
    cdef double lk
    cdef long ln
    key[0] = hp.key[0]
    node[0] = hp.node[0]
    hp.size -= 1
    if hp.size == 0:
        return
    lk = hp.key[hp.size]
    ln = hp.node[hp.size]
    while True:
        child = 2 * pos + 1
        if child >= hp.size:
            break
        if child + 1 < hp.size and hp.key[child + 1] < hp.key[child]:
            child += 1
        if hp.key[child] >= lk:
            break
        hp.key[pos] = hp.key[child]
        hp.node[pos] = hp.node[child]
        pos = child
    hp.key[pos] = lk
    hp.node[pos] = ln


def dijkstra_lattice(int nr, int nphi, int nt,
                     const long[::1] di, const long[::1] dj, const long[::1] dk,
                     const double[:, :, ::1] weights,
                     const unsigned char[::1] active,
                     const unsigned char[::1] pole,
                     int phimode,
                     const long[::1] src, const double[::1] src_d,
                     const long[::1] stop):
    """Single- or multi-source Dijkstra; returns the distance array.

    phimode: 0 clip, 1 periodic, 2 mirror at both ends of [0, nphi-1].
    pole[i*nt + k] marks fibres (i, :, k) collapsed to one vertex.
    Stops early once every node in ``stop`` is settled (empty = never).
    """
    cdef long n = <long> nr * nphi * nt
    cdef long ns = di.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist_arr = np.full(n, np.inf)
    cdef double[::1] dist = dist_arr
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] done_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] done = done_arr
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] want_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] want = want_arr
    cdef Heap hp
    cdef long a, u, v, s, i, j, k, i2, j2, k2, jj
    cdef long nstop = 0, nleft
    cdef double nd, key
    cdef int err = 0
    cdef long last = nphi - 1

    for a in range(stop.shape[0]):
        if 0 <= stop[a] < n and not want[stop[a]]:
            want[stop[a]] = 1
            nstop += 1
    nleft = nstop

    with nogil:
        if heap_init(&hp, 1024) != 0:
            err = 1
        else:
            for a in range(src.shape[0]):
                u = src[a]
                if 0 <= u < n and active[u] and src_d[a] < dist[u]:
                    dist[u] = src_d[a]
                    if heap_push(&hp, src_d[a], u) != 0:
                        err = 1
            while hp.size > 0 and err == 0:
                heap_pop(&hp, &key, &u)
                if done[u] or key > dist[u]:
                    continue
                k = u % nt
                j = (u // nt) % nphi
                i = u // (nt * nphi)
                if pole[i * nt + k]:
                    # all nodes of a collapsed fibre share one distance
                    for jj in range(nphi):
                        v = (i * nphi + jj) * nt + k
                        if not done[v] and active[v]:
                            dist[v] = key
                            done[v] = 1
                            if want[v]:
                                nleft -= 1
                else:
                    done[u] = 1
                    if want[u]:
                        nleft -= 1
                if nstop > 0 and nleft <= 0:
                    break
                for jj in range(nphi if pole[i * nt + k] else 1):
                    if pole[i * nt + k]:
                        j = jj
                    for s in range(ns):
                        i2 = i + di[s]
                        k2 = k + dk[s]
                        if i2 < 0 or i2 >= nr or k2 < 0 or k2 >= nt:
                            continue
                        j2 = j + dj[s]
                        if j2 < 0 or j2 > last:
                            if phimode == 1:
                                j2 = ((j2 % nphi) + nphi) % nphi
                            elif phimode == 2:
                                if last == 0:
                                    j2 = 0
                                elif j2 < 0:
                                    j2 = -j2
                                else:
                                    j2 = 2 * last - j2
                                if j2 < 0 or j2 > last:
                                    continue
                            else:
                                continue
                        v = (i2 * nphi + j2) * nt + k2
                        if done[v] or not active[v]:
                            continue
                        nd = key + weights[i, k, s]
                        if nd < dist[v]:
                            dist[v] = nd
                            if heap_push(&hp, nd, v) != 0:
                                err = 1
                                break
            heap_free(&hp)
    if err:
        raise MemoryError("dijkstra heap allocation failed")
    return dist_arr
