"""Pure-Python path kernels.

Reference implementation of the compiled kernels in ``_kernels.pyx``; the two
perform the same floating point operations in the same order, so given the
same uniforms they return identical paths.

``log_psi[j, l]`` is the log factor of a jump of size ``l`` at location ``j``
(column 0 is unused), ``log_fact[i] = log(i!)``.
"""
from math import exp, log


def _choose(w, nw, u):
    mx = w[0]
    for i in range(1, nw):
        if w[i] > mx:
            mx = w[i]
    total = 0.0
    for i in range(nw):
        w[i] = exp(w[i] - mx)
        total += w[i]
    target = u * total
    acc = 0.0
    pick = nw - 1
    for i in range(nw):
        acc += w[i]
        if target < acc:
            pick = i
            break
    return pick, log(w[pick]) - log(total)


def ap_sweep(path, log_psi, log_fact, uniforms):
    """One transition cycle over coordinates r = 1..n-1, in place."""
    n = len(path) - 1
    w = [0.0] * (n + 1)
    for r in range(1, n):
        q = r + 1
        while path[q] == path[q - 1]:
            q += 1
        lo = path[r - 1]
        sq = path[q]
        hi = r if r < sq - 1 else sq - 1
        nw = 0
        for k in range(lo, hi + 1):
            v = 0.0
            if k > lo:
                a = r - 1 - lo
                b = r - k
                v += log_fact[a] - log_fact[b] - log_fact[a - b] + log_psi[r, k - lo]
            a = q - 1 - k
            b = q - sq
            v += log_fact[a] - log_fact[b] - log_fact[a - b] + log_psi[q, sq - k]
            w[nw] = v
            nw += 1
        pick, _ = _choose(w, nw, uniforms[r - 1])
        k = lo + pick
        for i in range(r, q):
            path[i] = k


def sip_draw(n, log_psi, log_fact, perm, uniforms, path):
    """Sequential draw of a path of n+1 coordinates; returns log sigma.

    ``perm`` is the order I_1..I_{n-1} in which coordinates are fixed.
    """
    det = [False] * (n + 1)
    det[0] = True
    det[n] = True
    path[0] = 0
    path[n] = n
    w = [0.0] * (n + 1)
    log_sigma = 0.0
    for r in range(n - 1):
        ir = perm[r]
        p = ir - 1
        while not det[p]:
            p -= 1
        q = ir + 1
        while not det[q]:
            q += 1
        sp = path[p]
        sq = path[q]
        hi = ir if ir < sq else sq
        nw = 0
        for k in range(sp, hi + 1):
            v = 0.0
            if k > sp:
                a = ir - 1 - sp
                b = ir - k
                v += log_fact[a] - log_fact[b] - log_fact[a - b] + log_psi[ir, k - sp]
            if sq > k:
                a = q - 1 - k
                b = q - sq
                v += log_fact[a] - log_fact[b] - log_fact[a - b] + log_psi[q, sq - k]
            w[nw] = v
            nw += 1
        pick, lp = _choose(w, nw, uniforms[r])
        log_sigma += lp
        path[ir] = sp + pick
        det[ir] = True
    return log_sigma
