"""
逐期递推内核：静态滤波 / 时变载荷滤波，以及对应的模拟（simulate=True 时先用
给定创新生成 y_t 再走同一条递推）。

可用时用 numba 编译（nopython + nogil，线程池可并行）；否则退化为同名纯 Python 函数，
结果一致。内核不抛异常，失败通过状态码返回，由调用方转换成带上下文的异常。
"""
from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)

try:
    from numba import jit

    @jit(nopython=True)
    def _probe(x):
        return x + 1

    _probe(1)
    HAS_NUMBA = True
except Exception as e:  # ImportError 或编译失败

    def jit(*args, **kwargs):
        def decorator(func):
            return func

        return decorator

    HAS_NUMBA = False
    logger.warning("numba unavailable (%s); filter recursions run as plain Python", e)


# 状态码
OK = 0
NON_FINITE = 1
EIGEN_FLOOR = 2

_RELATIVE_FLOOR = 1e-10


@jit(nopython=True, nogil=True, cache=True)
def static_recursion(y, eps, simulate, lam, sinv, c, a, b, scale, f0, nu, const,
                     factors, scaled, contribs, next_f):
    """返回 (失败的 t 或 -1, 累计对数似然)。scale 为预先算好的 I^{-beta}。"""
    T = y.shape[0]
    n = lam.shape[0]
    r = lam.shape[1]
    gain = (nu + n) / (nu - 2.0)
    half = 0.5 * (nu + n)
    f = f0.copy()
    e = np.empty(n)
    grad = np.empty(r)
    s = np.empty(r)
    fn = np.empty(r)
    total = 0.0
    for t in range(T):
        for k in range(r):
            factors[t, k] = f[k]
        q = 0.0
        for i in range(n):
            mu = 0.0
            for k in range(r):
                mu += lam[i, k] * f[k]
            if simulate:
                y[t, i] = mu + eps[t, i]
            e[i] = y[t, i] - mu
            q += e[i] * e[i] * sinv[i]
        w = 1.0 + q / (nu - 2.0)
        ll = const - half * np.log(w)
        contribs[t] = ll
        total += ll
        for k in range(r):
            acc = 0.0
            for i in range(n):
                acc += lam[i, k] * sinv[i] * e[i]
            grad[k] = gain * acc / w
        for k in range(r):
            acc = 0.0
            for j in range(r):
                acc += scale[k, j] * grad[j]
            s[k] = acc
            scaled[t, k] = acc
        ok = True
        for k in range(r):
            acc = c[k]
            for j in range(r):
                acc += a[k, j] * s[j] + b[k, j] * f[j]
            fn[k] = acc
            if not np.isfinite(acc):
                ok = False
        if not ok:
            return t, total
        for k in range(r):
            f[k] = fn[k]
    for k in range(r):
        next_f[k] = f[k]
    return -1, total


@jit(nopython=True, nogil=True, cache=True)
def tv_recursion(y, eps, simulate, l0, g0, sinv, c_l, a_l, b_l, c_g, a_g, b_g,
                 tie, n_ties, beta, nu, const, info_scale,
                 factors, scaled, contribs, loadings, infos, next_l, next_g):
    """
    返回 (状态码, t, 特征值序号, 特征值, 累计对数似然)。

    l 为列优先 vec：Lambda_t[i, k] = l[k * n + i]。
    tie[m] 为 l 第 m 个元素所属的自由参数编号，-1 表示固定；同编号的得分求和后共享。
    """
    T = y.shape[0]
    n = sinv.shape[0]
    r = g0.shape[0]
    nr = n * r
    gain = (nu + n) / (nu - 2.0)
    half = 0.5 * (nu + n)
    l = l0.copy()
    g = g0.copy()
    e = np.empty(n)
    grad_g = np.empty(r)
    s_g = np.empty(r)
    gn = np.empty(r)
    grad_l = np.empty(nr)
    ln = np.empty(nr)
    agg = np.empty(n_ties)
    info = np.empty((r, r))
    scale = np.empty((r, r))
    total = 0.0
    for t in range(T):
        for k in range(r):
            factors[t, k] = g[k]
        for m in range(nr):
            loadings[t, m] = l[m]
        q = 0.0
        for i in range(n):
            mu = 0.0
            for k in range(r):
                mu += l[k * n + i] * g[k]
            if simulate:
                y[t, i] = mu + eps[t, i]
            e[i] = y[t, i] - mu
            q += e[i] * e[i] * sinv[i]
        w = 1.0 + q / (nu - 2.0)
        ll = const - half * np.log(w)
        contribs[t] = ll
        total += ll
        coef = gain / w

        for k in range(r):
            acc = 0.0
            for i in range(n):
                acc += l[k * n + i] * sinv[i] * e[i]
            grad_g[k] = coef * acc
            for i in range(n):
                grad_l[k * n + i] = coef * g[k] * sinv[i] * e[i]

        for k in range(r):
            for j in range(k, r):
                acc = 0.0
                for i in range(n):
                    acc += l[k * n + i] * sinv[i] * l[j * n + i]
                info[k, j] = info_scale * acc
                info[j, k] = info[k, j]
                infos[t, k, j] = info[k, j]
                infos[t, j, k] = info[k, j]

        if beta == 0.0:
            for k in range(r):
                s_g[k] = grad_g[k]
        else:
            d, v = np.linalg.eigh(info)
            top = d.max()
            floor = _RELATIVE_FLOOR * top if top > 0.0 else _RELATIVE_FLOOR
            for k in range(r):
                if d[k] <= floor:
                    return EIGEN_FLOOR, t, k, d[k], total
            for k in range(r):
                for j in range(r):
                    acc = 0.0
                    for m in range(r):
                        acc += v[k, m] * d[m] ** (-beta) * v[j, m]
                    scale[k, j] = acc
            for k in range(r):
                acc = 0.0
                for j in range(r):
                    acc += scale[k, j] * grad_g[j]
                s_g[k] = acc
        for k in range(r):
            scaled[t, k] = s_g[k]

        for p in range(n_ties):
            agg[p] = 0.0
        for m in range(nr):
            if tie[m] >= 0:
                agg[tie[m]] += grad_l[m]
        ok = True
        for m in range(nr):
            s_l = agg[tie[m]] if tie[m] >= 0 else 0.0
            ln[m] = c_l[m] + a_l[m] * s_l + b_l[m] * l[m]
            if not np.isfinite(ln[m]):
                ok = False
        for k in range(r):
            acc = c_g[k]
            for j in range(r):
                acc += a_g[k, j] * s_g[j] + b_g[k, j] * g[j]
            gn[k] = acc
            if not np.isfinite(acc):
                ok = False
        if not ok:
            return NON_FINITE, t, -1, 0.0, total
        for m in range(nr):
            l[m] = ln[m]
        for k in range(r):
            g[k] = gn[k]
    for m in range(nr):
        next_l[m] = l[m]
    for k in range(r):
        next_g[k] = g[k]
    return OK, -1, -1, 0.0, total
