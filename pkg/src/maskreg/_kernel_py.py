"""Numpy fallback for the compiled likelihood kernel (same signatures)."""
import numpy as np
from scipy.special import erfc


def _point_terms(pts, QB, focal, cx, cy, L, R, t, radius):
    x = (pts - t) @ R  # rows are R^T (b - t)
    z = x[:, 2]
    valid = z > 0
    z = np.where(valid, z, 1.0)
    wa = x[:, 0] / z
    ha = x[:, 1] / z
    ra = np.linalg.norm(x, axis=1)
    rho = np.sqrt(1.0 + wa * wa + ha * ha)
    dz_dw = -ra * wa / rho**3
    dz_dh = -ra * ha / rho**3
    QAi = np.empty((len(pts), 3, 3))
    QAi[:, 0] = np.stack([z + wa * dz_dw, wa * dz_dh, wa / rho], axis=1)
    QAi[:, 1] = np.stack([ha * dz_dw, z + ha * dz_dh, ha / rho], axis=1)
    QAi[:, 2] = np.stack([dz_dw, dz_dh, 1.0 / rho], axis=1)
    M = QB @ R @ QAi
    C = L + M @ L @ M.transpose(0, 2, 1)
    detC = np.linalg.det(C)
    Lam = M.transpose(0, 2, 1) @ np.linalg.solve(C, M)
    l11, l22, l33 = Lam[:, 0, 0], Lam[:, 1, 1], Lam[:, 2, 2]
    l21 = 0.5 * (Lam[:, 1, 0] + Lam[:, 0, 1])
    l31 = 0.5 * (Lam[:, 2, 0] + Lam[:, 0, 2])
    l32 = 0.5 * (Lam[:, 2, 1] + Lam[:, 1, 2])
    D11 = (l11 * l33 - l31 * l31) / l33
    D12 = (l33 * l21 - l31 * l32) / l33
    D22 = (l22 * l33 - l32 * l32) / l33
    s2 = np.sqrt(2.0 * l33)
    detD = D11 * D22 - D12 * D12
    ext_u = radius * np.sqrt(D22 / detD) * focal
    ext_v = radius * np.sqrt(D11 / detD) * focal
    return valid & (detC > 0), wa, ha, ra, detC, (D11, D12, D22), (l31 / s2, l32 / s2, l33 / s2), ext_u, ext_v


def _point_values(pts, QB, state, depth, focal, cx, cy, L, R, t, radius, eps):
    valid, wa, ha, ra, detC, (D11, D12, D22), (v1, v2, v3), ext_u, ext_v = _point_terms(
        pts, QB, focal, cx, cy, L, R, t, radius
    )
    H, W = state.shape
    u = wa * focal + cx
    vv = ha * focal + cy
    c0 = np.ceil(u - ext_u).astype(np.int64)
    r0 = np.ceil(vv - ext_v).astype(np.int64)
    c1 = np.floor(u + ext_u).astype(np.int64)
    r1 = np.floor(vv + ext_v).astype(np.int64)
    span_c = int(np.max(np.where(valid, c1 - c0, 0))) + 1
    span_r = int(np.max(np.where(valid, r1 - r0, 0))) + 1
    total = np.zeros(len(pts))
    rad2 = radius * radius
    for i in range(span_r):
        row = r0 + i
        dh = ha - (row - cy) / focal
        for j in range(span_c):
            col = c0 + j
            dw = wa - (col - cx) / focal
            q = D11 * dw * dw + 2.0 * D12 * dw * dh + D22 * dh * dh
            use = valid & (row <= r1) & (col <= c1) & (q <= rad2)
            if not np.any(use):
                continue
            g = np.exp(-0.5 * q)
            inside = (row >= 0) & (row < H) & (col >= 0) & (col < W)
            rr = np.clip(row, 0, H - 1)
            cc = np.clip(col, 0, W - 1)
            s = np.where(inside, state[rr, cc], 0)
            dep = depth[rr, cc]
            term = np.where(s == 0, 2.0 * g, g * erfc(-(v1 * dw + v2 * dh + v3 * (ra - dep))))
            total += np.where(use, term, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(total) - 0.5 * np.log(np.where(valid, detC, 1.0))
    out[~valid | (total <= eps)] = -np.inf
    return out


def point_logliks(pts, QB, state, depth, focal, cx, cy, L, R, t, radius, eps, out):
    out[:] = _point_values(
        np.asarray(pts), np.asarray(QB), np.asarray(state), np.asarray(depth),
        focal, cx, cy, np.asarray(L), np.asarray(R), np.asarray(t), radius, eps,
    )


def cloud_logliks(pts, QB, state, depth, focal, cx, cy, L, Rs, ts, radius, eps, out):
    pts, QB, state, depth, L = map(np.asarray, (pts, QB, state, depth, L))
    Rs, ts = np.asarray(Rs), np.asarray(ts)
    for k in range(len(Rs)):
        vals = _point_values(pts, QB, state, depth, focal, cx, cy, L, Rs[k], ts[k], radius, eps)
        out[k] = -np.inf if np.any(vals == -np.inf) else float(np.sum(vals))
