"""Scratch validation: independent scalar re-implementation of the recursion."""
import math
import numpy as np

from stoprule.core import GainSpec, gain_eval
from stoprule.estimator import (
    EstimatorConfig, ExpertGrid, fit_stopper, expert_predict, aggregate_predict,
    cesaro_predict, mixture_weights, cumulative_loss, stage_targets,
    closed_form_kernel_terms,
)
from stoprule.kernel import KernelProfile, kernel_eval


def brute_tables(z, gains, config):
    """Straight-from-the-definitions scalar implementation (slow, independent)."""
    z = list(map(float, z))
    n = len(z)
    L = gains.horizon
    grid = config.grid
    c = config.temperature if config.temperature is not None else 8.0 * gains.bound ** 2
    prof = config.profile

    def tf(vec):
        if config.return_convention == "step-relative":
            return list(vec)
        out, acc = [], 1.0
        for v in vec:
            acc *= v
            out.append(acc)
        return out

    def window(i, k, j):  # window z_{i-k}^{i+j}, 1-based i
        return tf(z[i - k - 1 : i + j])

    memo_online = {}
    memo_target = {}

    def kernel(u, w, h, m):
        v = [(a - b) / h for a, b in zip(u, w)]
        return kernel_eval(prof, np.array(v), m)

    def expert_at(j, msize, k, h, query):
        num = den = 0.0
        for i in range(k + 1, msize - j):  # i' = k+1..msize-j-1
            kw = kernel(query, window(i, k, j), h, k + j + 1)
            num += target(j, i) * kw
            den += kw
        return num / den if den > 0 else 0.0

    def online(j, i, e):
        key = (j, i, e)
        if key not in memo_online:
            k, h = grid.entries[e]
            if i < k + 1:
                memo_online[key] = 0.0
            else:
                memo_online[key] = expert_at(j, i, k, h, window(i, k, j))
        return memo_online[key]

    def loss_sum(j, msize, e):
        skip = min(config.skip_for_stage(j, L), max(0, n - j - 1))
        top = min(msize - 1, n - j - 1)
        return sum((online(j, l, e) - target(j, l)) ** 2 for l in range(skip + 1, top + 1))

    def weights(j, msize):
        raw = [grid.prior[e] * math.exp(-loss_sum(j, msize, e) / c) for e in range(len(grid))]
        tot = sum(raw)
        return [r / tot for r in raw] if tot > 0 else list(grid.prior)

    def agg_online(j, i):
        v = weights(j, i)
        return sum(v[e] * online(j, i, e) for e in range(len(grid)))

    def target(j, i):
        key = (j, i)
        if key not in memo_target:
            g = gain_eval(gains, j + 1, z[i : i + j + 1])
            nested = 0.0 if j + 1 >= L else agg_online(j + 1, i)
            memo_target[key] = max(g, nested)
        return memo_target[key]

    def aggregate_at(j, msize, horizon):
        v = weights(j, msize)
        acc = 0.0
        for e, (k, h) in enumerate(grid.entries):
            if msize - j - k - 1 <= 0 or n < k + 1:
                continue
            query = tf(z[n - k - 1 :] + list(horizon[:j]))
            acc += v[e] * expert_at(j, msize, k, h, query)
        return acc

    return {
        "target": target, "online": online, "weights": weights,
        "agg_online": agg_online, "loss_sum": loss_sum, "aggregate_at": aggregate_at,
    }


def main():
    rng = np.random.default_rng(7)
    n, L = 28, 3
    z = np.exp(rng.normal(0.002, 0.05, n))
    B = 4.0

    def g_of(j):
        return lambda pre: min(B, max(0.0, B * abs(float(np.prod(pre)) - 1.0) * 6.0)) if j else 1.0

    gains = GainSpec(horizon=L, bound=B, gains=tuple(g_of(j) for j in range(L + 1)))
    for conv in ("interval-anchored", "step-relative"):
        for kind in ("gaussian", "compact-uniform"):
            for skip in (0, 3):
                grid = ExpertGrid(entries=((0, 0.05), (1, 0.2), (2, 0.5)), prior=np.array([0.5, 0.3, 0.2]))
                cfg = EstimatorConfig(grid=grid, profile=KernelProfile(kind), skip_scale=skip,
                                      return_convention=conv, cesaro=True)
                fit = fit_stopper(z, gains, cfg)
                bf = brute_tables(z, gains, cfg)
                # targets
                for j in range(L):
                    T = stage_targets(fit, j)
                    for i in range(1, n - j):
                        assert abs(T[i - 1] - bf["target"](j, i)) < 1e-10, (conv, kind, skip, j, i)
                # online + weights + losses
                for j in range(L):
                    for e in range(len(grid)):
                        for i in range(1, n - j + 1):
                            got = fit.stages[j].online[e, i - 1]
                            want = bf["online"](j, i, e)
                            assert abs(got - want) < 1e-10, ("online", conv, kind, skip, j, e, i, got, want)
                    for m in (1, 2, 5, n // 2, n):
                        wv = mixture_weights(fit, j, m)
                        bw = bf["weights"](j, m)
                        assert np.allclose(wv, bw, atol=1e-10), ("weights", conv, kind, skip, j, m)
                        for e, ent in enumerate(grid.entries):
                            cl = cumulative_loss(fit, j, ent, m)
                            bl = bf["loss_sum"](j, m, e) / m
                            assert abs(cl - bl) < 1e-10, ("loss", j, m, e)
                # final aggregates at a fresh query
                horizon = np.exp(rng.normal(0, 0.05, L))
                for j in range(L):
                    for m in (5, n // 2, n):
                        got = aggregate_predict(fit, j, m, horizon)
                        want = bf["aggregate_at"](j, m, horizon)
                        assert abs(got - want) < 1e-10, ("agg", conv, kind, skip, j, m, got, want)
                    ces = cesaro_predict(fit, j, horizon)
                    want = np.mean([bf["aggregate_at"](j, m, horizon) for m in range(1, n + 1)])
                    assert abs(ces - want) < 1e-9, ("cesaro", conv, kind, skip, j)
                print(f"OK conv={conv} kind={kind} skip={skip} kernel_terms={fit.kernel_terms} "
                      f"closed={closed_form_kernel_terms(n, L, grid)}")
                assert fit.kernel_terms == closed_form_kernel_terms(n, L, grid)


if __name__ == "__main__":
    main()
