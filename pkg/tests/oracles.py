"""Independent brute-force reference implementations.

Everything here is written the slow, obvious way (python loops, cmath,
closed forms), sharing no code with the package beyond numpy arrays at the
boundary. Tests compare package output against these.
"""

import cmath
import math


def score_transe(ent, rel, h, r, t):
    return -math.sqrt(sum((ent[h][i] + rel[r][i] - ent[t][i]) ** 2 for i in range(len(rel[r]))))


def score_distmult(ent, rel, h, r, t):
    return sum(ent[h][i] * rel[r][i] * ent[t][i] for i in range(len(rel[r])))


def _as_complex(row, d):
    return [complex(row[i], row[d + i]) for i in range(d)]


def score_complex(ent, rel, h, r, t, d):
    hs = _as_complex(ent[h], d)
    rs = _as_complex(rel[r], d)
    ts = _as_complex(ent[t], d)
    return sum((hs[i] * rs[i] * ts[i].conjugate()).real for i in range(d))


def score_rescal(ent, rel, h, r, t, d):
    total = 0.0
    for i in range(d):
        for j in range(d):
            total += ent[h][i] * rel[r][i * d + j] * ent[t][j]
    return total


def score_rotate(ent, rel, h, r, t, d):
    hs = _as_complex(ent[h], d)
    ts = _as_complex(ent[t], d)
    sq = 0.0
    for i in range(d):
        diff = hs[i] * cmath.exp(1j * rel[r][i]) - ts[i]
        sq += abs(diff) ** 2
    return -math.sqrt(sq)


def score(method, ent, rel, h, r, t, d):
    if method == "transe":
        return score_transe(ent, rel, h, r, t)
    if method == "distmult":
        return score_distmult(ent, rel, h, r, t)
    if method == "complex":
        return score_complex(ent, rel, h, r, t, d)
    if method == "rescal":
        return score_rescal(ent, rel, h, r, t, d)
    if method == "rotate":
        return score_rotate(ent, rel, h, r, t, d)
    raise ValueError(method)


def optimistic_rank(scores, gold, mask=None):
    rank = 1
    for e, s in enumerate(scores):
        if e == gold or (mask is not None and mask[e]):
            continue
        if s > scores[gold]:
            rank += 1
    return rank


def pessimistic_rank(scores, gold, mask=None):
    rank = 0
    for e, s in enumerate(scores):
        if mask is not None and mask[e] and e != gold:
            continue
        if s >= scores[gold]:
            rank += 1
    return rank


def top_k_flag(scores, gold, k, tie_handling, mask=None):
    opt = optimistic_rank(scores, gold, mask)
    pess = pessimistic_rank(scores, gold, mask)
    if tie_handling == "optimistic":
        return opt <= k
    if tie_handling == "pessimistic":
        return pess <= k
    return (opt + pess) / 2.0 <= k


def borda_points(scores):
    """Closed-form positional points: a candidate beaten by `hi` others and
    tied with `eq - 1` occupies positions hi .. hi + eq - 1, worth the block
    average m - 1 - hi - (eq - 1) / 2."""
    m = len(scores)
    points = []
    for s in scores:
        hi = sum(1 for o in scores if o > s)
        eq = sum(1 for o in scores if o == s)
        points.append(m - 1 - hi - (eq - 1) / 2.0)
    return points


def majority_points(scores):
    top = max(scores)
    winners = [i for i, s in enumerate(scores) if s == top]
    return [1.0 / len(winners) if i in winners else 0.0 for i in range(len(scores))]


def range_points(scores):
    lo, hi = min(scores), max(scores)
    if lo == hi:
        return [0.0] * len(scores)
    return [2.0 * (s - lo) / (hi - lo) - 1.0 for s in scores]


def totals(rule, ballots):
    fn = {"majority": majority_points, "borda": borda_points, "range": range_points}[rule]
    out = [0.0] * len(ballots[0])
    for ballot in ballots:
        for i, p in enumerate(fn(list(ballot))):
            out[i] += p
    return out


def spearman_rho(x, y):
    def ranks(v):
        out = []
        for a in v:
            lower = sum(1 for b in v if b < a)
            equal = sum(1 for b in v if b == a)
            out.append(lower + (equal + 1) / 2.0)
        return out

    rx, ry = ranks(list(x)), ranks(list(y))
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


def answer_set(scores, tau, mask=None):
    return frozenset(
        e
        for e, s in enumerate(scores)
        if s >= tau and not (mask is not None and mask[e])
    )


def hits_fraction(flag_list):
    return sum(1.0 for f in flag_list if f) / len(flag_list)
