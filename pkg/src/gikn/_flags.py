"""Log-scaled flag propagation over compressed words.

A forward pass carries an orthonormal frame Q through the cocycle and
re-orthonormalizes after every step (QR with positive diagonal), summing
log|R_jj|.  An adjoint pass does the same with transposed generators in
reverse order.  Passes over repeated blocks stop iterating as soon as the
frame entering a copy stops moving; after that every remaining copy
contributes the same logs.  Results are memoized per (node, frame).
"""

from __future__ import annotations

import math

import numpy as np

from .core import _Cat, _Leaf, _slice
from .errors import DegenerateProductError

CONV_TOL = 1e-12
_MEMO_MIN = 48
_EXPLICIT_CAP = 20_000_000


def _key(Q):
    return (np.round(Q, 11) + 0.0).tobytes()


def _canon(Q):
    """Fix column signs so that the largest entry of each column is positive."""
    idx = np.argmax(np.abs(Q), axis=0)
    sg = np.sign(Q[idx, np.arange(Q.shape[1])])
    sg[sg == 0] = 1.0
    return Q * sg


def converged_signs(Q_old, Q_new, tol=CONV_TOL):
    """Column signs S with Q_new == Q_old * S, or None."""
    S = np.sign(np.einsum("ij,ij->j", Q_old, Q_new))
    S[S == 0] = 1.0
    if np.max(np.abs(Q_new - Q_old * S)) < tol:
        return S
    return None


def span_converged(Q_old, Q_new, k, tol=1e-9):
    A = Q_old[:, :k]
    B = Q_new[:, :k]
    return np.max(np.abs(A @ A.T - B @ B.T)) < tol


def generic_frame(d):
    rng = np.random.default_rng(20240601)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


class Engine:
    """Per-cocycle pass machinery with memo tables."""

    def __init__(self, cocycle):
        self.c = cocycle
        self.d = cocycle.dimension
        self.fwd = [np.array(a) for a in cocycle.generators]
        self.adj = [np.array(a.T) for a in cocycle.generators]
        self.logdet = [math.log(abs(np.linalg.det(a))) for a in cocycle.generators]
        if self.d == 2:
            self.fwd2 = [(a[0, 0], a[0, 1], a[1, 0], a[1, 1], ld)
                         for a, ld in zip(self.fwd, self.logdet)]
            self.adj2 = [(a[0, 0], a[0, 1], a[1, 0], a[1, 1], ld)
                         for a, ld in zip(self.adj, self.logdet)]
        self.memo = {}
        self.dense_memo = {}
        self.ext_memo = {}

    # ------------------------------------------------------------------ passes
    def run(self, node, Q, adj=False):
        """Frame after traversing node (forward) or before it (adjoint)."""
        if node.length >= _MEMO_MIN:
            k = (node, adj, _key(Q))
            hit = self.memo.get(k)
            if hit is not None:
                return hit
        if isinstance(node, _Leaf):
            out = self._leaf(node.syms, Q, adj)
        elif isinstance(node, _Cat):
            out = self._cat(node, Q, adj)
        else:
            out = self._pow(node, Q, adj)
        if node.length >= _MEMO_MIN:
            self.memo[k] = out
        return out

    def _leaf(self, syms, Q, adj, record=False):
        seq = reversed(syms) if adj else syms
        if self.d == 2:
            return self._leaf2(seq, Q, adj, record)
        mats = self.adj if adj else self.fwd
        logs = np.zeros(self.d)
        states = [Q] if record else None
        for s in seq:
            Qn, R = np.linalg.qr(mats[s] @ Q)
            dg = np.diag(R)
            ad = np.abs(dg)
            if np.min(ad) < 1e-300:
                raise DegenerateProductError("product collapsed below 1e-300")
            sg = np.sign(dg)
            sg[sg == 0] = 1.0
            Q = Qn * sg
            logs += np.log(ad)
            if record:
                states.append(Q)
        if record:
            return Q, logs, states
        return Q, logs

    def _leaf2(self, seq, Q, adj, record):
        mats = self.adj2 if adj else self.fwd2
        q11, q21, q12, q22 = Q[0, 0], Q[1, 0], Q[0, 1], Q[1, 1]
        l1 = 0.0
        l2 = 0.0
        log = math.log
        hyp = math.hypot
        states = [(q11, q21, q12, q22)] if record else None
        for s in seq:
            a, b, c, e, ld = mats[s]
            z1 = a * q11 + b * q21
            z2 = c * q11 + e * q21
            w1 = a * q12 + b * q22
            w2 = c * q12 + e * q22
            r = hyp(z1, z2)
            if r < 1e-300:
                raise DegenerateProductError("product collapsed below 1e-300")
            q11 = z1 / r
            q21 = z2 / r
            if q11 * w2 - q21 * w1 >= 0.0:
                q12, q22 = -q21, q11
            else:
                q12, q22 = q21, -q11
            lr = log(r)
            l1 += lr
            l2 += ld - lr
            if record:
                states.append((q11, q21, q12, q22))
        Qo = np.array([[q11, q12], [q21, q22]])
        logs = np.array([l1, l2])
        if record:
            arr = np.array(states).reshape(-1, 2, 2).transpose(0, 2, 1)
            return Qo, logs, arr
        return Qo, logs

    def _cat(self, node, Q, adj):
        logs = np.zeros(self.d)
        parts = reversed(node.parts) if adj else node.parts
        for part in parts:
            Q, lg = self.run(part, Q, adj)
            logs = logs + lg
        return Q, logs

    def _pow(self, node, Q, adj):
        c, m = node.base, node.count
        total = np.zeros(self.d)
        cur = Q
        j = 0
        while j < m:
            nxt, logs = self.run(c, cur, adj)
            total = total + logs
            j += 1
            S = converged_signs(cur, nxt)
            if S is not None:
                rem = m - j
                total = total + rem * logs
                if rem % 2:
                    nxt = nxt * S
                return nxt, total
            cur = nxt
            if j == 8 and m - j > 8:
                res = self._pow_dense(c, m - j, cur, adj)
                if res is not None:
                    Qd, ld = res
                    return Qd, total + ld
        return cur, total

    # --------------------------------------------------------- dense fallback
    def dense(self, node):
        """(P, s) with product = exp(s) * P and max|P| = 1."""
        hit = self.dense_memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, _Leaf):
            P = np.eye(self.d)
            s = 0.0
            for sym in node.syms:
                P = self.fwd[sym] @ P
                mx = np.max(np.abs(P))
                P = P / mx
                s += math.log(mx)
            out = (P, s)
        elif isinstance(node, _Cat):
            P = np.eye(self.d)
            s = 0.0
            for part in node.parts:
                Pp, sp = self.dense(part)
                P = Pp @ P
                mx = np.max(np.abs(P))
                P = P / mx
                s += sp + math.log(mx)
            out = (P, s)
        else:
            out = self._dense_power(*self.dense(node.base), node.count)
        self.dense_memo[node] = out
        return out

    @staticmethod
    def _dense_power(P, s, m):
        R = np.eye(P.shape[0])
        rs = 0.0
        B, bs = P, s
        while m:
            if m & 1:
                R = B @ R
                mx = np.max(np.abs(R))
                R = R / mx
                rs += bs + math.log(mx)
            m >>= 1
            if m:
                B = B @ B
                mx = np.max(np.abs(B))
                B = B / mx
                bs = 2 * bs + math.log(mx)
        return R, rs

    def _pow_dense(self, c, r, Q, adj):
        P, s = self.dense(c)
        if np.linalg.cond(P) > 1e8:
            return None
        Pr, sr = self._dense_power(P, s, r)
        if np.linalg.cond(Pr) > 1e10:
            return None
        if adj:
            Pr = Pr.T
        Qn, R = np.linalg.qr(Pr @ Q)
        dg = np.diag(R)
        sg = np.sign(dg)
        sg[sg == 0] = 1.0
        return Qn * sg, np.log(np.abs(dg)) + sr

    # ------------------------------------------------------- periodic frames
    def periodic(self, node, adj=False, max_passes=None):
        """Iterate whole-period passes from a fixed generic frame.

        Returns (Q, logs, conv, S): the frame at phase 0, the logs of the last
        pass, per-k flags telling whether the span of the first k columns
        converged (k = 1..d-1), and column signs of the last pass (None when
        the frame did not converge)."""
        d = self.d
        if max_passes is None:
            max_passes = int(min(2000, max(40, 400_000 // max(1, node.length))))
        Q = generic_frame(d)
        Q_prev = None
        logs = None
        for _ in range(max_passes):
            Qn, logs = self.run(node, Q, adj)
            S = converged_signs(Q, Qn)
            if S is not None:
                return Qn, logs, [True] * (d - 1), S
            Q_prev, Q = Q, Qn
        conv = [span_converged(Q_prev, Q, k) for k in range(1, d)]
        return Q, logs, conv, None

    # ----------------------------------------------------- per-phase values
    def leaf_states(self, syms, Q, adj):
        """Frames at every position of a literal run (length n + 1 list)."""
        out = self._leaf(syms, Q, adj, record=True)
        return out[2]

    def extrema(self, node, Q, G, fn, tag):
        """(min, max) of fn over all phases inside node.

        Q is the forward frame at the node start, G the adjoint frame at the
        node end; fn maps stacked forward/adjoint frames to values."""
        memo = node.length >= _MEMO_MIN
        if memo:
            k = (node, tag, _key(_canon(Q)), _key(_canon(G)))
            hit = self.ext_memo.get(k)
            if hit is not None:
                return hit
        if isinstance(node, _Leaf):
            out = self._leaf_extrema(node.syms, Q, G, fn)
        elif isinstance(node, _Cat):
            out = self._cat_extrema(node, Q, G, fn, tag)
        else:
            out = self._pow_extrema(node, Q, G, fn, tag)
        if memo:
            self.ext_memo[k] = out
        return out

    def _leaf_extrema(self, syms, Q, G, fn):
        Qs = self.leaf_states(syms, Q, False)
        Gs = self.leaf_states(syms, G, True)
        Qs = np.asarray(Qs[:-1])
        Gs = np.asarray(Gs)[::-1][:-1]
        vals = fn(Qs, Gs)
        return float(np.min(vals)), float(np.max(vals))

    def _cat_extrema(self, node, Q, G, fn, tag):
        parts = node.parts
        fq = [Q]
        for part in parts[:-1]:
            fq.append(self.run(part, fq[-1], False)[0])
        bg = [None] * len(parts)
        bg[-1] = G
        for j in range(len(parts) - 1, 0, -1):
            bg[j - 1] = self.run(parts[j], bg[j], True)[0]
        lo, hi = math.inf, -math.inf
        for part, q, g in zip(parts, fq, bg):
            a, b = self.extrema(part, q, g, fn, tag)
            lo, hi = min(lo, a), max(hi, b)
        return lo, hi

    def _pow_extrema(self, node, Q, G, fn, tag, limit=64):
        """Copies j of the base see frames (F(j), B(m-1-j)); both sequences are
        eventually periodic (settled frames have period 1, rotation-like
        blocks longer periods), so only a preperiod plus one joint cycle of
        copies needs evaluating.  fn must not depend on column signs."""
        c, m = node.base, node.count
        fo = self._frame_orbit(c, Q, m, False, limit)
        bo = self._frame_orbit(c, G, m, True, limit)
        if fo is None or bo is None:
            return self._pow_extrema_explicit(c, m, Q, G, fn, tag)
        (fs, fmu, flam), (bs, bmu, blam) = fo, bo
        cyc = flam * blam // math.gcd(flam, blam)
        if cyc > 4096:
            return self._pow_extrema_explicit(c, m, Q, G, fn, tag)

        def at(seq, mu, lam, j):
            return seq[j] if j < mu else seq[mu + (j - mu) % lam]

        idx = set(range(min(m, fmu))) | set(range(max(0, m - bmu), m))
        idx |= set(range(min(m, fmu), min(m - bmu, fmu + cyc)))
        lo, hi = math.inf, -math.inf
        for j in sorted(idx):
            a, b = self.extrema(c, at(fs, fmu, flam, j), at(bs, bmu, blam, m - 1 - j), fn, tag)
            lo, hi = min(lo, a), max(hi, b)
        return lo, hi

    def _frame_orbit(self, c, Q, m, adj, limit):
        """Frames entering copies 0, 1, ... of c as (seq, mu, lam): copy j sees
        seq[j] for j < mu and seq[mu + (j - mu) % lam] after, up to column
        signs.  None when no repetition shows up within ``limit`` copies."""
        seq = [Q]
        while len(seq) < m:
            if len(seq) > limit:
                return None
            nxt = self.run(c, seq[-1], adj)[0]
            for t in range(len(seq) - 1, -1, -1):
                if converged_signs(seq[t], nxt) is not None:
                    return seq, t, len(seq) - t
            seq.append(nxt)
        return seq, m, 1

    def _pow_extrema_explicit(self, c, m, Q, G, fn, tag):
        if m * c.length > _EXPLICIT_CAP:
            raise MemoryError("block does not settle; too long to scan explicitly")
        fq = [Q]
        for _ in range(m - 1):
            fq.append(self.run(c, fq[-1], False)[0])
        bg = [G]
        for _ in range(m - 1):
            bg.append(self.run(c, bg[-1], True)[0])
        lo, hi = math.inf, -math.inf
        for j in range(m):
            a, b = self.extrema(c, fq[j], bg[m - 1 - j], fn, tag)
            lo, hi = min(lo, a), max(hi, b)
        return lo, hi

    def frames_at(self, node, x, Q0, G0):
        """Forward and adjoint frames at phase x given periodic frames at phase 0."""
        if x == 0:
            return Q0, G0
        Qx = self.run(_slice(node, 0, x), Q0, False)[0]
        Gx = self.run(_slice(node, x, node.length), G0, True)[0]
        return Qx, Gx


def engine_for(cocycle) -> Engine:
    if cocycle._engine is None:
        cocycle._engine = Engine(cocycle)
    return cocycle._engine


__all__ = ["Engine", "engine_for", "generic_frame", "converged_signs"]
