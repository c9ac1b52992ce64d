"""Hot GNN kernels: forward pass and weight Jacobians for every node.

Two implementations share one array contract:

* ``theta``  (N, p) flat per-node weights, each layer ``vec``-stacked
  column by column;
* ``kappa``  (N, d_in) node inputs;
* ``abar``   (N, N) bool self-loop adjacency;
* ``dims``   int64 ``[d_in, d0, ..., d_{k-1}, d_out]``; layer ``j`` maps
  ``dims[j] + 1`` inputs to ``dims[j+1]`` outputs;
* ``acts``   int64 activation code per layer (see ``ACT_*``).

``forward`` returns ``phi`` (N, d_out) plus the per-layer caches ``agg``
(layer inputs) and ``pre`` (pre-activations), both padded to
(L, N, max(dims)+1). ``jacobian`` consumes those caches and returns
``J[i, j, :, :] = d phi_i / d theta_j`` of shape (N, N, d_out, p).

Neighbor sums add the summands in ascending order of value, so a
relabeling of the nodes reproduces the aggregate bit for bit.
"""

from __future__ import annotations

import numpy as np

from ._backend import BACKEND, njit

ACT_IDENTITY = 0
ACT_TANH = 1
ACT_SWISH = 2

ACTIVATIONS = {"identity": ACT_IDENTITY, "tanh": ACT_TANH, "swish": ACT_SWISH}


def layer_offsets(dims: np.ndarray) -> np.ndarray:
    sizes = (dims[:-1] + 1) * dims[1:]
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------


def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def act_np(x, code):
    if code == ACT_IDENTITY:
        return x.copy()
    if code == ACT_TANH:
        return np.tanh(x)
    return x * _sigmoid_np(x)


def act_prime_np(x, code):
    if code == ACT_IDENTITY:
        return np.ones_like(x)
    if code == ACT_TANH:
        t = np.tanh(x)
        return 1.0 - t * t
    s = _sigmoid_np(x)
    return s + x * s * (1.0 - s)


def _aggregate_np(h, abar):
    vals = np.sort(np.where(abar[:, :, None], h[None, :, :], 0.0), axis=1)
    total = vals[:, 0, :].copy()
    for m in range(1, vals.shape[1]):
        total += vals[:, m, :]
    return total


def forward_np(theta, kappa, abar, dims, acts):
    n_nodes = theta.shape[0]
    n_layers = dims.shape[0] - 1
    width = int(dims.max()) + 1
    offs = layer_offsets(dims)
    agg = np.zeros((n_layers, n_nodes, width))
    pre = np.zeros((n_layers, n_nodes, width))
    h = np.concatenate([kappa, np.ones((n_nodes, 1))], axis=1)
    phi = None
    for j in range(n_layers):
        rows, cols = int(dims[j]) + 1, int(dims[j + 1])
        w = theta[:, offs[j]:offs[j + 1]].reshape(n_nodes, cols, rows)
        a = _aggregate_np(h, abar) if j < n_layers - 1 else h
        z = np.matmul(w, a[:, :, None])[:, :, 0]
        agg[j, :, :rows] = a
        pre[j, :, :cols] = z
        if j < n_layers - 1:
            h = np.concatenate([act_np(z, acts[j]), np.ones((n_nodes, 1))], axis=1)
        else:
            phi = act_np(z, acts[j])
    return phi, agg, pre


def jacobian_np(theta, abar, dims, acts, agg, pre):
    n_nodes, p = theta.shape
    n_layers = dims.shape[0] - 1
    d_out = int(dims[-1])
    offs = layer_offsets(dims)
    diag = np.arange(n_nodes)
    jac = np.zeros((n_nodes, n_nodes, d_out, p))
    abar_f = abar.astype(float)

    j = n_layers - 1
    rows = int(dims[j]) + 1
    dact = act_prime_np(pre[j, :, :d_out], acts[j])
    blk = np.zeros((n_nodes, d_out, d_out, rows))
    o = np.arange(d_out)
    blk[:, o, o, :] = dact[:, :, None] * agg[j, :, None, :rows]
    jac[diag, diag, :, offs[j]:offs[j + 1]] = blk.reshape(n_nodes, d_out, d_out * rows)
    w = theta[:, offs[j]:offs[j + 1]].reshape(n_nodes, d_out, rows)
    # adjoint[i, m, o, a]: d phi_i[o] / d (input of the next layer up at node m)[a]
    adjoint = np.zeros((n_nodes, n_nodes, d_out, rows))
    adjoint[diag, diag] = dact[:, :, None] * w

    for j in range(n_layers - 2, -1, -1):
        rows, cols = int(dims[j]) + 1, int(dims[j + 1])
        slope = act_prime_np(pre[j, :, :cols], acts[j])
        delta = adjoint[:, :, :, :cols] * slope[None, :, None, :]
        blk = delta[..., None] * agg[j][None, :, None, None, :rows]
        jac[:, :, :, offs[j]:offs[j + 1]] = blk.reshape(n_nodes, n_nodes, d_out, cols * rows)
        if j > 0:
            w = theta[:, offs[j]:offs[j + 1]].reshape(n_nodes, cols, rows)
            g_in = np.einsum("imoc,mca->imoa", delta, w)
            adjoint = np.einsum("ml,imoa->iloa", abar_f, g_in)
    return jac


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------


@njit
def _act_scalar(x, code):
    if code == ACT_IDENTITY:
        return x
    if code == ACT_TANH:
        return np.tanh(x)
    if x >= 0.0:
        s = 1.0 / (1.0 + np.exp(-x))
    else:
        ex = np.exp(x)
        s = ex / (1.0 + ex)
    return x * s


@njit
def _act_prime_scalar(x, code):
    if code == ACT_IDENTITY:
        return 1.0
    if code == ACT_TANH:
        t = np.tanh(x)
        return 1.0 - t * t
    if x >= 0.0:
        s = 1.0 / (1.0 + np.exp(-x))
    else:
        ex = np.exp(x)
        s = ex / (1.0 + ex)
    return s + x * s * (1.0 - s)


@njit
def forward_nb(theta, kappa, abar, dims, acts):
    n_nodes = theta.shape[0]
    n_layers = dims.shape[0] - 1
    width = 0
    for v in dims:
        width = max(width, v)
    width += 1
    offs = np.zeros(n_layers + 1, dtype=np.int64)
    for j in range(n_layers):
        offs[j + 1] = offs[j] + (dims[j] + 1) * dims[j + 1]
    agg = np.zeros((n_layers, n_nodes, width))
    pre = np.zeros((n_layers, n_nodes, width))
    h = np.zeros((n_nodes, width))
    for i in range(n_nodes):
        for a in range(dims[0]):
            h[i, a] = kappa[i, a]
        h[i, dims[0]] = 1.0
    h_next = np.zeros((n_nodes, width))
    buf = np.zeros(n_nodes)
    phi = np.zeros((n_nodes, dims[n_layers]))
    for j in range(n_layers):
        rows = dims[j] + 1
        cols = dims[j + 1]
        last = j == n_layers - 1
        for i in range(n_nodes):
            if last:
                for a in range(rows):
                    agg[j, i, a] = h[i, a]
            else:
                for a in range(rows):
                    cnt = 0
                    for m in range(n_nodes):
                        if abar[i, m]:
                            # insertion sort keeps the summation order label-free
                            v = h[m, a]
                            q = cnt
                            while q > 0 and buf[q - 1] > v:
                                buf[q] = buf[q - 1]
                                q -= 1
                            buf[q] = v
                            cnt += 1
                    s = 0.0
                    for q in range(cnt):
                        s += buf[q]
                    agg[j, i, a] = s
            base = offs[j]
            for c in range(cols):
                z = 0.0
                for a in range(rows):
                    z += theta[i, base + c * rows + a] * agg[j, i, a]
                pre[j, i, c] = z
                if last:
                    phi[i, c] = _act_scalar(z, acts[j])
                else:
                    h_next[i, c] = _act_scalar(z, acts[j])
            if not last:
                h_next[i, cols] = 1.0
        if not last:
            for i in range(n_nodes):
                for a in range(cols + 1):
                    h[i, a] = h_next[i, a]
    return phi, agg, pre


@njit
def jacobian_nb(theta, abar, dims, acts, agg, pre):
    n_nodes, p = theta.shape
    n_layers = dims.shape[0] - 1
    d_out = dims[n_layers]
    width = agg.shape[2]
    offs = np.zeros(n_layers + 1, dtype=np.int64)
    for j in range(n_layers):
        offs[j + 1] = offs[j] + (dims[j] + 1) * dims[j + 1]
    jac = np.zeros((n_nodes, n_nodes, d_out, p))
    adjoint = np.zeros((n_nodes, d_out, width))
    adj_next = np.zeros((n_nodes, d_out, width))
    g_in = np.zeros((d_out, width))
    delta = np.zeros((d_out, width))
    active = np.zeros(n_nodes, dtype=np.bool_)
    active_next = np.zeros(n_nodes, dtype=np.bool_)

    for i in range(n_nodes):
        jl = n_layers - 1
        rows = dims[jl] + 1
        base = offs[jl]
        adjoint[:, :, :] = 0.0
        active[:] = False
        active[i] = True
        for o in range(d_out):
            da = _act_prime_scalar(pre[jl, i, o], acts[jl])
            for a in range(rows):
                jac[i, i, o, base + o * rows + a] = da * agg[jl, i, a]
                adjoint[i, o, a] = da * theta[i, base + o * rows + a]
        for jl in range(n_layers - 2, -1, -1):
            rows = dims[jl] + 1
            cols = dims[jl + 1]
            base = offs[jl]
            adj_next[:, :, :] = 0.0
            active_next[:] = False
            for m in range(n_nodes):
                if not active[m]:
                    continue
                for c in range(cols):
                    sl = _act_prime_scalar(pre[jl, m, c], acts[jl])
                    for o in range(d_out):
                        delta[o, c] = adjoint[m, o, c] * sl
                for o in range(d_out):
                    for c in range(cols):
                        dv = delta[o, c]
                        for a in range(rows):
                            jac[i, m, o, base + c * rows + a] = dv * agg[jl, m, a]
                if jl > 0:
                    for o in range(d_out):
                        for a in range(rows):
                            s = 0.0
                            for c in range(cols):
                                s += delta[o, c] * theta[m, base + c * rows + a]
                            g_in[o, a] = s
                    for l in range(n_nodes):
                        if abar[m, l]:
                            active_next[l] = True
                            for o in range(d_out):
                                for a in range(rows):
                                    adj_next[l, o, a] += g_in[o, a]
            if jl > 0:
                for m in range(n_nodes):
                    active[m] = active_next[m]
                    for o in range(d_out):
                        for a in range(width):
                            adjoint[m, o, a] = adj_next[m, o, a]
    return jac


if BACKEND == "numba":
    forward = forward_nb
    jacobian = jacobian_nb
else:
    forward = forward_np
    jacobian = jacobian_np


# ---------------------------------------------------------------------------
# fused closed-loop right-hand side (numba only)
# ---------------------------------------------------------------------------

_FUSED_CACHE: dict = {}


def make_closed_loop_rhs(g_fn, h_fn, f_all_fn, xd_fn):
    """Compile the full closed-loop derivative around jitted dynamics.

    The returned kernel has signature
    ``rhs(t, state, n, n_nodes, abar, adj, hop, reach, dims, acts, gains)``
    with ``gains = [k1, k2, k3, theta_bar, eps_proj]`` and per-node scalar
    adaptation gains appended; it returns ``(deriv, u, phi)``.
    """
    key = (g_fn, h_fn, f_all_fn, xd_fn)
    if key in _FUSED_CACHE:
        return _FUSED_CACHE[key]
    import numba

    @numba.njit(cache=False)
    def rhs(t, state, n, n_nodes, abar, adj, hop, reach, dims, acts, gains):
        k1 = gains[0]
        k2 = gains[1]
        k3 = gains[2]
        theta_bar = gains[3]
        eps_proj = gains[4]
        p = (state.shape[0] - n - n_nodes * n) // n_nodes
        x0 = state[:n]
        ys = state[n:n + n_nodes * n].reshape((n_nodes, n))
        theta = state[n + n_nodes * n:].reshape((n_nodes, p))
        xd, xd_dot = xd_fn(t)
        e = x0 - xd
        eta = np.empty((n_nodes, n))
        for i in range(n_nodes):
            for c in range(n):
                eta[i, c] = k1 * e[c] + xd[c] - ys[i, c]
        kappa = np.zeros((n_nodes, n * (n_nodes + 1)))
        for i in range(n_nodes):
            for c in range(n):
                kappa[i, c] = x0[c]
            for m in range(n_nodes):
                if abar[i, m]:
                    for c in range(n):
                        kappa[i, n + m * n + c] = ys[m, c]
        phi, agg, pre = forward_nb(theta, kappa, abar, dims, acts)
        jac = jacobian_nb(theta, abar, dims, acts, agg, pre)
        d_out = phi.shape[1]

        deriv = np.empty_like(state)
        u = np.empty((n_nodes, n))
        f = f_all_fn(ys, adj)
        for i in range(n_nodes):
            for o in range(d_out):
                s = k2 * eta[i, o] + phi[i, o] + (1.0 - k1) * xd_dot[o]
                for j in range(n_nodes):
                    if hop[i, j]:
                        for q in range(p):
                            s += jac[i, j, o, q] * (theta[i, q] - theta[j, q])
                u[i, o] = s
                deriv[n + i * n + o] = f[i, o] + s

        x0_dot = h_fn(x0)
        for i in range(n_nodes):
            gi = g_fn(x0, ys[i])
            for c in range(n):
                x0_dot[c] += gi * (x0[c] - ys[i, c])
        for c in range(n):
            deriv[c] = x0_dot[c]

        scale = eps_proj * theta_bar * theta_bar
        nu = np.empty(p)
        base = n + n_nodes * n
        for i in range(n_nodes):
            gam = gains[5 + i]
            for q in range(p):
                v = 0.0
                for j in range(n_nodes):
                    if reach[i, j]:
                        for o in range(d_out):
                            v += jac[i, j, o, q] * eta[i, o]
                cons = theta[i, q]
                for j in range(n_nodes):
                    if adj[i, j]:
                        cons += theta[i, q] - theta[j, q]
                nu[q] = gam * (v - k3 * cons)
            sq = 0.0
            gn = 0.0
            for q in range(p):
                sq += theta[i, q] * theta[i, q]
                gn += theta[i, q] * nu[q]
            pval = (sq - theta_bar * theta_bar) / scale
            if pval > 0.0 and gn > 0.0:
                # radial removal; Gamma = gam I cancels in the ratio
                coef = min(1.0, pval) * gn / sq
                for q in range(p):
                    deriv[base + i * p + q] = nu[q] - coef * theta[i, q]
            else:
                for q in range(p):
                    deriv[base + i * p + q] = nu[q]
        return deriv, u, phi

    _FUSED_CACHE[key] = rhs
    return rhs
