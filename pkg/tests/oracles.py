"""Independent reference values.

Each function evaluates a formula directly with ``math`` on plain Python
floats, without touching the package. The ``FROZEN`` numbers were produced by
these functions and are kept as literals so that a change in either side shows.
"""
import itertools
import math


def lin(pa, pb):
    s = math.log(pa + pb)
    return (math.log(pa) + math.log(pb) - 2 * s) / (2 * s)


def iof(n, ca, cb):
    return math.log(ca) * math.log(cb)


def of(pa, pb):
    return math.log(1 / pa) * math.log(1 / pb)


def goodall(props, idx, variant):
    me = props[idx]
    if variant == 1:
        return sum(p * p for p in props if p <= me)
    if variant == 2:
        return sum(p * p for p in props if p >= me)
    if variant == 3:
        return me * me
    return 1 - me * me


def ve(props):
    h = -sum(p * math.log(p) for p in props if p > 0)
    return 1 - h / math.log(len(props))


def vm(props):
    q = len(props)
    return 1 - q / (q - 1) * (1 - sum(p * p for p in props))


def tvd(a, b):
    return 0.5 * sum(abs(x - y) for x, y in zip(a, b))


def kl_sym(a, b):
    return sum(x * math.log2(x / y) for x, y in zip(a, b)) + sum(y * math.log2(y / x) for x, y in zip(a, b))


def chisq(a, b, p):
    return sum((x - y) ** 2 / w for x, y, w in zip(a, b, p))


def ahmad_dey(a, b):
    """max over proper non-empty subsets w of P(w|a) + P(not w|b) - 1."""
    q = len(a)
    best = -math.inf
    for mask in itertools.product((0, 1), repeat=q):
        if 0 < sum(mask) < q:
            val = sum(x for x, m in zip(a, mask) if m) + sum(y for y, m in zip(b, mask) if not m) - 1
            best = max(best, val)
    return best


def ari(a, b):
    """Adjusted Rand index through pair counting over all row pairs."""
    n = len(a)
    same_a = same_b = both = 0
    for i in range(n):
        for j in range(i + 1, n):
            sa, sb = a[i] == a[j], b[i] == b[j]
            same_a += sa
            same_b += sb
            both += sa and sb
    total = n * (n - 1) / 2
    expected = same_a * same_b / total
    top = (same_a + same_b) / 2
    return (both - expected) / (top - expected)


FROZEN = {
    "lin_0.2_0.3": 1.0294468445267844,
    "iof_100_10_20": 6.89792847568658,
    "of_0.1_0.2": 3.705867745270216,
    "goodall1_0.3": 0.13,
    "goodall2_0.3": 0.34,
    "ve_uniform_binary": 0.0,
    "vm_uniform_ternary": 0.0,
    "chisq_disjoint_half": 4.0,
    "kl_3_1": 1.584962500721156,
    "ari_crossing": -0.5,
}
