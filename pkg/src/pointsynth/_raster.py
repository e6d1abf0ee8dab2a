"""Scanline triangle rasterizer with a depth test, JIT-compiled once per host.

Kept minimal on purpose: flat per-triangle color, perspective-correct depth
via linear interpolation of 1/z in screen space, strict < z-test against a
buffer pre-filled with scene depth. Triangle order is fixed by the caller, so
output is bit-deterministic.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def raster_triangles(tri_xy, tri_zinv, tri_color, zbuf, rgb, mask, hand_depth):
    """Rasterize triangles into rgb/mask/hand_depth wherever they win the z-test.

    tri_xy: (T, 3, 2) float64 screen vertices. tri_zinv: (T, 3) float64 per
    vertex 1/z. tri_color: (T, 3) uint8. zbuf: (H, W) float64 initialized to
    scene depth (+inf where invalid); updated in place. A pixel center is
    inside when all three (winding-normalized) edge functions are >= 0.
    """
    height, width = zbuf.shape
    for t in range(tri_xy.shape[0]):
        x0 = tri_xy[t, 0, 0]
        y0 = tri_xy[t, 0, 1]
        x1 = tri_xy[t, 1, 0]
        y1 = tri_xy[t, 1, 1]
        x2 = tri_xy[t, 2, 0]
        y2 = tri_xy[t, 2, 1]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        sign = 1.0
        if area < 0.0:
            sign = -1.0
            area = -area
        inv_area = 1.0 / area

        xmin = int(max(0.0, np.floor(min(x0, min(x1, x2)))))
        xmax = int(min(width - 1.0, np.ceil(max(x0, max(x1, x2)))))
        ymin = int(max(0.0, np.floor(min(y0, min(y1, y2)))))
        ymax = int(min(height - 1.0, np.ceil(max(y0, max(y1, y2)))))
        if xmin > xmax or ymin > ymax:
            continue

        z0 = tri_zinv[t, 0]
        z1 = tri_zinv[t, 1]
        z2 = tri_zinv[t, 2]
        r = tri_color[t, 0]
        g = tri_color[t, 1]
        b = tri_color[t, 2]

        for py in range(ymin, ymax + 1):
            yc = py + 0.5
            for px in range(xmin, xmax + 1):
                xc = px + 0.5
                w0 = sign * ((x1 - xc) * (y2 - yc) - (y1 - yc) * (x2 - xc))
                if w0 < 0.0:
                    continue
                w1 = sign * ((x2 - xc) * (y0 - yc) - (y2 - yc) * (x0 - xc))
                if w1 < 0.0:
                    continue
                w2 = sign * ((x0 - xc) * (y1 - yc) - (y0 - yc) * (x1 - xc))
                if w2 < 0.0:
                    continue
                zinv = (w0 * z0 + w1 * z1 + w2 * z2) * inv_area
                if zinv <= 0.0:
                    continue
                z = 1.0 / zinv
                if z < zbuf[py, px]:
                    zbuf[py, px] = z
                    rgb[py, px, 0] = r
                    rgb[py, px, 1] = g
                    rgb[py, px, 2] = b
                    mask[py, px] = True
                    hand_depth[py, px] = z
