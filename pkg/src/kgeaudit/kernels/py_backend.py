"""Pure-numpy kernel backend.

Layouts (all float64, C-contiguous):
  transe   entities (nE, d), relations (nR, d)
  distmult entities (nE, d), relations (nR, d)
  complex  entities (nE, 2d), relations (nR, 2d); first half real parts,
           second half imaginary parts
  rescal   entities (nE, d), relations (nR, d*d); each row a row-major d x d
           mixing matrix
  rotate   entities (nE, 2d) as in complex, relations (nR, d) phases in
           radians

Score paths reduce per row with elementwise products and sum(axis=-1) only.
Matrix-product shortcuts are deliberately avoided: BLAS reductions order
additions differently per shape, and batch scoring must be bit-identical to
the same scores computed one triple at a time.

Gradient accumulation scatters per-triple contributions with np.add.at in
input order, so repeated runs accumulate in the same order.
"""

from __future__ import annotations

import numpy as np

NAME = "py"


def _halves(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = x.shape[-1] // 2
    return x[..., :d], x[..., d:]


def _score_transe(eh, er, et):
    u = eh + er - et
    return -np.sqrt((u * u).sum(axis=-1))


def _score_distmult(eh, er, et):
    return (eh * er * et).sum(axis=-1)


def _score_complex(eh, er, et):
    hr, hi = _halves(eh)
    rr, ri = _halves(er)
    tr, ti = _halves(et)
    return (hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr).sum(axis=-1)


def _score_rescal(eh, er, et):
    d = eh.shape[-1]
    w = er.reshape(er.shape[:-1] + (d, d))
    hw = (eh[..., :, None] * w).sum(axis=-2)
    return (hw * et).sum(axis=-1)


def _score_rotate(eh, er, et):
    hr, hi = _halves(eh)
    tr, ti = _halves(et)
    cos, sin = np.cos(er), np.sin(er)
    u_re = hr * cos - hi * sin - tr
    u_im = hr * sin + hi * cos - ti
    return -np.sqrt((u_re * u_re + u_im * u_im).sum(axis=-1))


_SCORERS = {
    "transe": _score_transe,
    "distmult": _score_distmult,
    "complex": _score_complex,
    "rescal": _score_rescal,
    "rotate": _score_rotate,
}


def score_triples(method, ent, rel, h, r, t):
    """Scores for n triples given as parallel index arrays."""
    fn = _SCORERS.get(method)
    if fn is None:
        raise ValueError(f"unknown scoring method: {method!r}")
    return fn(ent[h], rel[r], ent[t])


def score_candidates(method, ent, rel, fixed, relation, tail_query):
    """Scores of every entity as a candidate answer for one query.

    Implemented as score_triples over broadcast index arrays so the result is
    bit-identical to scoring each candidate triple individually.
    """
    n = ent.shape[0]
    cand = np.arange(n, dtype=np.int64)
    fix = np.full(n, fixed, dtype=np.int64)
    rr = np.full(n, relation, dtype=np.int64)
    if tail_query:
        return score_triples(method, ent, rel, fix, rr, cand)
    return score_triples(method, ent, rel, cand, rr, fix)


def accumulate_gradients(method, ent, rel, h, r, t, coeff, g_ent, g_rel):
    """Adds coeff[i] * d(score_i)/d(params) into the dense gradient tables.

    coeff is d(loss)/d(score) per triple. Rows at a zero-norm distance
    (transe, rotate) contribute zero gradient.
    """
    eh, er, et = ent[h], rel[r], ent[t]
    c = coeff[:, None]

    if method == "transe":
        u = eh + er - et
        nrm = np.sqrt((u * u).sum(axis=-1, keepdims=True))
        g = np.divide(u, nrm, out=np.zeros_like(u), where=nrm > 0)
        np.add.at(g_ent, h, -c * g)
        np.add.at(g_rel, r, -c * g)
        np.add.at(g_ent, t, c * g)
    elif method == "distmult":
        np.add.at(g_ent, h, c * er * et)
        np.add.at(g_rel, r, c * eh * et)
        np.add.at(g_ent, t, c * eh * er)
    elif method == "complex":
        hr, hi = _halves(eh)
        rr, ri = _halves(er)
        tr, ti = _halves(et)
        gh = np.concatenate([rr * tr + ri * ti, rr * ti - ri * tr], axis=-1)
        gr = np.concatenate([hr * tr + hi * ti, hr * ti - hi * tr], axis=-1)
        gt = np.concatenate([hr * rr - hi * ri, hi * rr + hr * ri], axis=-1)
        np.add.at(g_ent, h, c * gh)
        np.add.at(g_rel, r, c * gr)
        np.add.at(g_ent, t, c * gt)
    elif method == "rescal":
        d = eh.shape[-1]
        w = er.reshape(-1, d, d)
        gh = (w * et[:, None, :]).sum(axis=-1)
        gt = (w * eh[:, :, None]).sum(axis=-2)
        gw = (eh[:, :, None] * et[:, None, :]).reshape(-1, d * d)
        np.add.at(g_ent, h, c * gh)
        np.add.at(g_ent, t, c * gt)
        np.add.at(g_rel, r, c * gw)
    elif method == "rotate":
        hr, hi = _halves(eh)
        tr, ti = _halves(et)
        cos, sin = np.cos(er), np.sin(er)
        rot_re = hr * cos - hi * sin
        rot_im = hr * sin + hi * cos
        u_re = rot_re - tr
        u_im = rot_im - ti
        nrm = np.sqrt((u_re * u_re + u_im * u_im).sum(axis=-1, keepdims=True))
        inv = np.divide(1.0, nrm, out=np.zeros_like(nrm), where=nrm > 0)
        gh_re = -(u_re * cos + u_im * sin) * inv
        gh_im = -(-u_re * sin + u_im * cos) * inv
        gt_re = u_re * inv
        gt_im = u_im * inv
        gth = (u_re * rot_im - u_im * rot_re) * inv
        np.add.at(g_ent, h, c * np.concatenate([gh_re, gh_im], axis=-1))
        np.add.at(g_ent, t, c * np.concatenate([gt_re, gt_im], axis=-1))
        np.add.at(g_rel, r, c * gth)
    else:
        raise ValueError(f"unknown scoring method: {method!r}")
