"""Reference implementations used only as test oracles.

They deliberately avoid numpy vectorization and the package's own code paths.
"""

import math
from collections import Counter

TIE = 1e-10


def mi_counter(xs, cs):
    """Plug-in I(X;C) from explicit dictionaries, summed with fsum."""
    n = len(xs)
    joint = Counter(zip(xs, cs))
    px = Counter(xs)
    pc = Counter(cs)
    terms = [(k / n) * math.log(k * n / (px[x] * pc[c])) for (x, c), k in joint.items()]
    return max(math.fsum(terms), 0.0)


def jmim_bruteforce(bands, cs, k):
    """Evaluate the argmax-min recurrence from scratch at every step."""
    selected = []
    while len(selected) < k:
        best, best_score = None, -math.inf
        for i in range(len(bands)):
            if i in selected:
                continue
            if not selected:
                score = mi_counter(list(bands[i]), cs)
            else:
                score = min(mi_counter(list(zip(bands[i], bands[s])), cs) for s in selected)
            if score > best_score + TIE:
                best, best_score = i, score
        selected.append(best)
    return selected


def pearson_naive(x, y):
    """Two-pass Pearson correlation on Python lists."""
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        return 0.0
    return sxy / math.sqrt(sxx * syy)
