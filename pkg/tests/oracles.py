"""Independent brute-force references, written straight from the model definition.

Everything here works in linear space with mpmath at 50 digits and shares no
code with the package: pmfs are evaluated from their closed forms, the latent
sum is enumerated term by term, and the truncation normaliser is the total
joint mass over the whole outcome grid [0, A]^m.
"""

import itertools

import mpmath as mp

mp.mp.dps = 50


def pmf(x, comp):
    """comp: dict with 'theta' or ('r', 'p'), optional 'pi'."""
    x = int(x)
    if "theta" in comp:
        th = mp.mpf(comp["theta"])
        base = th ** x * mp.e ** (-th) / mp.factorial(x)
    else:
        r, p = mp.mpf(comp["r"]), mp.mpf(comp["p"])
        base = mp.gamma(r + x) / (mp.gamma(r) * mp.factorial(x)) * p ** r * (1 - p) ** x
    pi = comp.get("pi")
    if pi is None:
        return base
    pi = mp.mpf(pi)
    return pi * (1 if x == 0 else 0) + (1 - pi) * base


def joint(ys, factor, variables):
    """P(Y = ys) for one group, enumerating the shared latent value."""
    if factor is None:
        return pmf(ys[0], variables[0])
    total = mp.mpf(0)
    for u in range(min(ys) + 1):
        term = pmf(u, factor)
        for y, v in zip(ys, variables):
            term *= pmf(y - u, v)
        total += term
    return total


def grid_mass(bound, factor, variables):
    m = len(variables)
    return mp.fsum(joint(ys, factor, variables)
                   for ys in itertools.product(range(bound + 1), repeat=m))


def log_lik(rows, factor, variables, trunc=None):
    """Sum over rows of log P(row) (conditioned on all values <= trunc if given)."""
    total = mp.mpf(0)
    norm = grid_mass(trunc, factor, variables) if trunc is not None else None
    for row in rows:
        prob = joint(list(row), factor, variables)
        if norm is not None:
            prob /= norm
        total += mp.log(prob)
    return total
