"""Hot lattice kernels, each with a numba loop version and a numpy version.

The public names at the bottom dispatch on ``osclab._accel.USE_NUMBA``.
Both versions take flattened C-order arrays over the ``N**d`` grid and
must agree exactly; ``tests/test_kernels.py`` runs them side by side.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

NEG = -np.inf


# --------------------------------------------------------------------------
# rho: least j >= j0 with 2 * #E(Q_j(I)) <= eps * (2j+1)^d
# --------------------------------------------------------------------------

@njit(cache=True)
def _rho_nb(prefix_flat, N, d, eps, j0, jmax):
    n = N ** d
    pstr = np.empty(d, np.int64)
    for a in range(d):
        pstr[a] = (N + 1) ** (d - 1 - a)
    out = np.empty(n, np.float64)
    coord = np.empty(d, np.int64)
    lo = np.empty(d, np.int64)
    hi = np.empty(d, np.int64)
    for idx in range(n):
        rem = idx
        for a in range(d - 1, -1, -1):
            coord[a] = rem % N
            rem //= N
        out[idx] = np.inf
        for j in range(j0, jmax + 1):
            for a in range(d):
                lo[a] = max(coord[a] - j, 0)
                hi[a] = min(coord[a] + j + 1, N)
            s = 0
            for bits in range(1 << d):
                pos = 0
                par = 0
                for a in range(d):
                    if (bits >> a) & 1:
                        pos += hi[a] * pstr[a]
                    else:
                        pos += lo[a] * pstr[a]
                        par += 1
                if par % 2:
                    s -= prefix_flat[pos]
                else:
                    s += prefix_flat[pos]
            if 2.0 * s <= eps * (2.0 * j + 1.0) ** d:
                out[idx] = j
                break
    return out


def _rho_np(prefix_flat, N, d, eps, j0, jmax):
    from .lattice import box_sums

    prefix = prefix_flat.reshape((N + 1,) * d)
    n = N ** d
    coords = np.stack(np.unravel_index(np.arange(n), (N,) * d), axis=1).astype(np.int64)
    out = np.full(n, np.inf)
    todo = np.arange(n)
    for j in range(j0, jmax + 1):
        if todo.size == 0:
            break
        c = coords[todo]
        s = box_sums(prefix, np.maximum(c - j, 0), np.minimum(c + j + 1, N))
        ok = 2.0 * s <= eps * (2.0 * j + 1.0) ** d
        out[todo[ok]] = j
        todo = todo[~ok]
    return out


# --------------------------------------------------------------------------
# Maximal dyadic cover. Cubes processed in non-increasing rho order
# (ties lexicographic); returns (orders, hull corner index) per element.
# --------------------------------------------------------------------------

def _hull_order(rho):
    """Smallest m with 2^m >= 2 rho, so 2 rho <= 2^m < 4 rho."""
    m = np.zeros(rho.shape, dtype=np.int64)
    fin = np.isfinite(rho)
    r = rho[fin].astype(np.int64)
    mm = np.zeros(r.shape, dtype=np.int64)
    while True:
        grow = (np.int64(1) << mm) < 2 * r
        if not grow.any():
            break
        mm[grow] += 1
    m[fin] = mm
    return m


def _cover_order(rho, N, d):
    corners = np.stack(np.unravel_index(np.arange(rho.size), (N,) * d), axis=0)
    keys = [corners[a] for a in range(d - 1, -1, -1)] + [-np.where(np.isfinite(rho), rho, -1.0)]
    return np.lexsort(keys)


@njit(cache=True)
def _cover_nb(order, rho, morder, N, d):
    n = N ** d
    half = N // 2
    covered = np.zeros(n, np.bool_)
    el_m = np.empty(n, np.int64)
    el_idx = np.empty((n, d), np.int64)
    cnt = 0
    coord = np.empty(d, np.int64)
    lo = np.empty(d, np.int64)
    hi = np.empty(d, np.int64)
    cur = np.empty(d, np.int64)
    for t in range(n):
        idx = order[t]
        if not np.isfinite(rho[idx]):
            continue
        if covered[idx]:
            continue
        rem = idx
        for a in range(d - 1, -1, -1):
            coord[a] = rem % N
            rem //= N
        m = morder[idx]
        side = np.int64(1) << m
        tot = 1
        for a in range(d):
            c = coord[a] - half
            q = c >> m
            el_idx[cnt, a] = q
            lo[a] = max(q * side + half, 0)
            hi[a] = min((q + 1) * side + half, N)
            tot *= hi[a] - lo[a]
        el_m[cnt] = m
        cnt += 1
        for a in range(d):
            cur[a] = lo[a]
        for _ in range(tot):
            pos = 0
            for a in range(d):
                pos = pos * N + cur[a]
            covered[pos] = True
            a = d - 1
            while a >= 0:
                cur[a] += 1
                if cur[a] < hi[a]:
                    break
                cur[a] = lo[a]
                a -= 1
    return el_m[:cnt], el_idx[:cnt]


def _key(idx, N):
    span = N + 2
    w = span ** np.arange(idx.shape[1] - 1, -1, -1, dtype=np.int64)
    return (idx + N // 2 + 1) @ w


def _cover_np(order, rho, morder, N, d):
    # same-order hulls are equal or disjoint, so each order level is one batch
    half = N // 2
    n = N ** d
    corners = np.stack(np.unravel_index(np.arange(n), (N,) * d), axis=1).astype(np.int64) - half
    fin = np.isfinite(rho)
    covered = np.zeros(n, dtype=bool)
    ms, idxs = [], []
    for m in sorted(set(morder[fin].tolist()), reverse=True):
        sel = fin & (morder == m) & ~covered
        if not sel.any():
            continue
        h = corners[sel] >> m
        uniq = np.unique(h, axis=0)
        ms.append(np.full(len(uniq), m, dtype=np.int64))
        idxs.append(uniq)
        covered |= np.isin(_key(corners >> m, N), _key(uniq, N))
    if not ms:
        return np.zeros(0, np.int64), np.zeros((0, d), np.int64)
    return np.concatenate(ms), np.concatenate(idxs)


# --------------------------------------------------------------------------
# Annulus maxima: out[k-1, I] = max of field over A(I, k) clipped to Q.
# Each annulus is the union of 2d faces; the face max is a (d-1)-axis
# sliding max of half-width k read at I +- k e_a, grown one layer per k.
# --------------------------------------------------------------------------

def _dilate_np(arr, axis):
    out = arr.copy()
    sl = [slice(None)] * arr.ndim
    a = list(sl); b = list(sl)
    a[axis] = slice(1, None); b[axis] = slice(None, -1)
    np.maximum(out[tuple(a)], arr[tuple(b)], out=out[tuple(a)])
    np.maximum(out[tuple(b)], arr[tuple(a)], out=out[tuple(b)])
    return out


def _annulus_max_np(field_flat, N, d, L):
    f = field_flat.reshape((N,) * d)
    faces = [f.copy() for _ in range(d)]
    out = np.full((L, N ** d), NEG)
    for k in range(1, L + 1):
        acc = np.full((N,) * d, NEG)
        for a in range(d):
            g = faces[a]
            for b in range(d):
                if b != a:
                    g = _dilate_np(g, b)
            faces[a] = g
            if k < N:
                src = [slice(None)] * d; dst = [slice(None)] * d
                src[a] = slice(k, None); dst[a] = slice(None, N - k)
                np.maximum(acc[tuple(dst)], g[tuple(src)], out=acc[tuple(dst)])
                src[a] = slice(None, N - k); dst[a] = slice(k, None)
                np.maximum(acc[tuple(dst)], g[tuple(src)], out=acc[tuple(dst)])
        out[k - 1] = acc.ravel()
    return out


@njit(cache=True)
def _dilate_nb(src, dst, N, d, axis):
    n = src.size
    st = N ** (d - 1 - axis)
    for idx in range(n):
        c = (idx // st) % N
        v = src[idx]
        if c > 0 and src[idx - st] > v:
            v = src[idx - st]
        if c < N - 1 and src[idx + st] > v:
            v = src[idx + st]
        dst[idx] = v


@njit(cache=True)
def _annulus_max_nb(field_flat, N, d, L):
    n = N ** d
    faces = np.empty((d, n), np.float64)
    for a in range(d):
        faces[a, :] = field_flat
    tmp = np.empty(n, np.float64)
    out = np.full((L, n), -np.inf)
    for k in range(1, L + 1):
        for a in range(d):
            for b in range(d):
                if b != a:
                    _dilate_nb(faces[a], tmp, N, d, b)
                    faces[a, :] = tmp
            if k >= N:
                continue
            st = N ** (d - 1 - a)
            for idx in range(n):
                c = (idx // st) % N
                v = out[k - 1, idx]
                if c + k < N:
                    w = faces[a, idx + k * st]
                    if w > v:
                        v = w
                if c - k >= 0:
                    w = faces[a, idx - k * st]
                    if w > v:
                        v = w
                out[k - 1, idx] = v
    return out


# --------------------------------------------------------------------------
# kappa sequences for every cube. kmask[k-1, I] says k in K_I; Mk[k] = M(k)
# for k = 0..L (index 0 unused). Output: lengths and ascending sequences
# padded with 0.
# --------------------------------------------------------------------------

@njit(cache=True)
def _kappa_nb(kmask, Mk, maxlen):
    L, n = kmask.shape
    seqs = np.zeros((n, maxlen), np.int64)
    lens = np.zeros(n, np.int64)
    buf = np.empty(maxlen, np.int64)
    for idx in range(n):
        cnt = 0
        t = L
        while t >= 1:
            k = t
            while k >= 1 and not kmask[k - 1, idx]:
                k -= 1
            if k < 1:
                break
            buf[cnt] = k
            cnt += 1
            t = k - Mk[k] - 1
        lens[idx] = cnt
        for j in range(cnt):
            seqs[idx, j] = buf[cnt - 1 - j]
    return lens, seqs


def _kappa_np(kmask, Mk, maxlen):
    L, n = kmask.shape
    ks = np.arange(1, L + 1)[:, None]
    prev = np.zeros((L + 1, n), dtype=np.int64)
    prev[1:] = np.maximum.accumulate(np.where(kmask, ks, 0), axis=0)
    cur = prev[L].copy()
    rev = []
    while True:
        alive = cur > 0
        if not alive.any():
            break
        rev.append(cur.copy())
        t = np.where(alive, cur - Mk[cur] - 1, 0)
        cur = np.where(alive & (t >= 1), prev[np.clip(t, 0, L), np.arange(n)], 0)
    lens = np.zeros(n, dtype=np.int64)
    seqs = np.zeros((n, maxlen), dtype=np.int64)
    if rev:
        stack = np.stack(rev, axis=1)  # descending, zero-padded
        lens = (stack > 0).sum(axis=1)
        for i in range(stack.shape[1]):
            pos = lens - 1 - i
            ok = pos >= 0
            seqs[ok, pos[ok]] = stack[ok, i]
    return lens, seqs


# --------------------------------------------------------------------------
# Centered-box maximal function: max_j #(set in Q_j(I)) / (2j+1)^d.
# --------------------------------------------------------------------------

@njit(cache=True)
def _maximal_nb(prefix_flat, N, d, jmax):
    n = N ** d
    pstr = np.empty(d, np.int64)
    for a in range(d):
        pstr[a] = (N + 1) ** (d - 1 - a)
    out = np.zeros(n, np.float64)
    coord = np.empty(d, np.int64)
    lo = np.empty(d, np.int64)
    hi = np.empty(d, np.int64)
    for idx in range(n):
        rem = idx
        for a in range(d - 1, -1, -1):
            coord[a] = rem % N
            rem //= N
        best = 0.0
        for j in range(0, jmax + 1):
            for a in range(d):
                lo[a] = max(coord[a] - j, 0)
                hi[a] = min(coord[a] + j + 1, N)
            s = 0
            for bits in range(1 << d):
                pos = 0
                par = 0
                for a in range(d):
                    if (bits >> a) & 1:
                        pos += hi[a] * pstr[a]
                    else:
                        pos += lo[a] * pstr[a]
                        par += 1
                if par % 2:
                    s -= prefix_flat[pos]
                else:
                    s += prefix_flat[pos]
            v = s / (2.0 * j + 1.0) ** d
            if v > best:
                best = v
        out[idx] = best
    return out


def _maximal_np(prefix_flat, N, d, jmax):
    from .lattice import box_sums

    prefix = prefix_flat.reshape((N + 1,) * d)
    n = N ** d
    c = np.stack(np.unravel_index(np.arange(n), (N,) * d), axis=1).astype(np.int64)
    out = np.zeros(n)
    for j in range(jmax + 1):
        s = box_sums(prefix, np.maximum(c - j, 0), np.minimum(c + j + 1, N))
        np.maximum(out, s / (2.0 * j + 1.0) ** d, out=out)
    return out


IMPLEMENTATIONS = {
    "rho": (_rho_nb, _rho_np),
    "cover": (_cover_nb, _cover_np),
    "annulus_max": (_annulus_max_nb, _annulus_max_np),
    "kappa": (_kappa_nb, _kappa_np),
    "maximal": (_maximal_nb, _maximal_np),
}

_pick = 0 if USE_NUMBA else 1
rho_scan = IMPLEMENTATIONS["rho"][_pick]
cover_scan = IMPLEMENTATIONS["cover"][_pick]
annulus_max = IMPLEMENTATIONS["annulus_max"][_pick]
kappa_all = IMPLEMENTATIONS["kappa"][_pick]
maximal_scan = IMPLEMENTATIONS["maximal"][_pick]

hull_order = _hull_order
cover_order = _cover_order
