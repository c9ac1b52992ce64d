"""Minimal SVG emitters (polylines only, no plotting stack)."""

from __future__ import annotations

import numpy as np

COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"]

W, H, PAD = 640, 480, 60


def _polyline(points: np.ndarray, color: str, width: float = 1.5, dash: str = "") -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{extra} points="{pts}"/>'


def _frame(body: list[str], title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>',
                      f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
                      *body, "</svg>\n"])


def _fit(points: np.ndarray, box=(PAD, PAD, W - PAD, H - PAD), equal: bool = False):
    lo, hi = points.min(axis=0), points.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    sx = (box[2] - box[0]) / span[0]
    sy = (box[3] - box[1]) / span[1]
    if equal:
        sx = sy = min(sx, sy)

    def tf(p):
        p = np.atleast_2d(p)
        return np.column_stack([box[0] + (p[:, 0] - lo[0]) * sx, box[3] - (p[:, 1] - lo[1]) * sy])

    return tf, lo, hi


def project3d(xyz: np.ndarray, azimuth: float = -60.0, elevation: float = 25.0) -> np.ndarray:
    """Orthographic projection onto the view plane."""
    az, el = np.radians(azimuth), np.radians(elevation)
    right = np.array([np.cos(az), np.sin(az), 0.0])
    up = np.array([-np.sin(el) * np.sin(az), np.sin(el) * np.cos(az), np.cos(el)])
    return np.column_stack([xyz @ right, xyz @ up])


def trajectory_svg(traj) -> str:
    paths = [("target", traj.x0, "#000000", ""), ("desired", traj.xd, "#888888", "5,4")]
    for i in range(traj.y.shape[1]):
        paths.append((f"influencer {i + 1}", traj.y[:, i], COLORS[i % len(COLORS)], ""))
    flat = np.concatenate([project3d(p) for _, p, _, _ in paths])
    tf, _, _ = _fit(flat, equal=True)
    body = []
    # projected coordinate axes from the data centroid
    center = np.concatenate([p for _, p, _, _ in paths]).mean(axis=0)
    span = np.ptp(np.concatenate([p for _, p, _, _ in paths]), axis=0).max() * 0.15
    for k, name in enumerate("xyz"):
        end = center.copy()
        end[k] += span
        seg = tf(project3d(np.vstack([center, end])))
        body.append(_polyline(seg, "#bbbbbb", 1.0))
        body.append(f'<text x="{seg[1, 0]:.1f}" y="{seg[1, 1]:.1f}" fill="#999">{name}</text>')
    for k, (name, p, color, dash) in enumerate(paths):
        body.append(_polyline(tf(project3d(p)), color, 1.2, dash))
        body.append(f'<circle cx="{tf(project3d(p[:1]))[0, 0]:.1f}" cy="{tf(project3d(p[:1]))[0, 1]:.1f}" '
                    f'r="3" fill="{color}"/>')
        body.append(f'<text x="{W - 150}" y="{50 + 16 * k}" fill="{color}">{name}</text>')
    return _frame(body, "Trajectories (orthographic 3-D view)")


def tracking_error_svg(traj) -> str:
    t, en = traj.t, traj.e_norm
    pts = np.column_stack([t, en])
    tf, lo, hi = _fit(np.vstack([pts, [[t.min(), 0.0]]]))
    body = [_polyline(np.array([[PAD, PAD], [PAD, H - PAD], [W - PAD, H - PAD]]), "#000000", 1.0)]
    for v in np.linspace(0.0, hi[1], 5):
        y = tf([[lo[0], v]])[0, 1]
        body.append(f'<text x="{PAD - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    for v in np.linspace(lo[0], hi[0], 5):
        x = tf([[v, 0.0]])[0, 0]
        body.append(f'<text x="{x:.1f}" y="{H - PAD + 18}" text-anchor="middle">{v:.0f}</text>')
    body.append(f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle">t (s)</text>')
    body.append(f'<text x="18" y="{H / 2}" transform="rotate(-90 18 {H / 2})" '
                f'text-anchor="middle">|e| (m)</text>')
    body.append(_polyline(tf(pts), COLORS[0], 1.2))
    return _frame(body, "Target position tracking error")
