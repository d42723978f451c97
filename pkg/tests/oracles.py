"""Independent reference computations used by the tests."""

from fractions import Fraction
from itertools import combinations


def exact_inverse(matrix):
    """Gauss-Jordan over rationals."""
    n = len(matrix)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


def brute_ltd(nominal_edges, weights, tau, n):
    """Enumerate every unordered pair and classify it by hand."""
    nominal = {tuple(sorted(e)) for e in nominal_edges}
    peak = max(abs(w) for w in weights.values())
    plus, minus, wsum = set(), set(), 0.0
    for i, j in combinations(range(n), 2):
        w = abs(weights.get((i, j), 0.0)) / peak
        present = w > 0 and w >= tau
        if present and (i, j) not in nominal:
            plus.add((i, j))
            wsum += w
        if not present and (i, j) in nominal:
            minus.add((i, j))
    return plus, minus, (len(plus) + len(minus)) / len(nominal), (wsum + len(minus)) / len(nominal)
