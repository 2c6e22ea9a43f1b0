"""Independent reference implementations used to check the library.

These are deliberately naive: exhaustive scans, exact rational arithmetic,
no shared code with the package beyond the value types.
"""

from fractions import Fraction


def containing_cell(cx, cy, width, height, rows, cols):
    """Scan every half-open cell rectangle for the one containing (cx, cy).

    Points on the far image edge belong to the last row/column.
    """
    cw, ch = width // cols, height // rows
    px = min(max(cx, 0), width - 1e-9)
    py = min(max(cy, 0), height - 1e-9)
    hits = [
        (i, j)
        for i in range(rows)
        for j in range(cols)
        if j * cw <= px < (j + 1) * cw and i * ch <= py < (i + 1) * ch
    ]
    assert len(hits) == 1, hits
    return hits[0]


def interval_trim(box, rect, min_visibility=0.0):
    """Clip via explicit 1-D interval intersections, exact in Fractions."""
    bx0, by0, bx1, by1 = (Fraction(v) for v in box)
    rx0, ry0, rx1, ry1 = (Fraction(v) for v in rect)

    def overlap(a0, a1, b0, b1):
        lo, hi = max(a0, b0), min(a1, b1)
        return (lo, hi) if hi > lo else None

    ix = overlap(bx0, bx1, rx0, rx1)
    iy = overlap(by0, by1, ry0, ry1)
    if ix is None or iy is None:
        return None
    if ix[1] - ix[0] < 1 or iy[1] - iy[0] < 1:
        return None
    if (ix[1] - ix[0]) * (iy[1] - iy[0]) < Fraction(min_visibility) * (bx1 - bx0) * (by1 - by0):
        return None
    return tuple(float(v) for v in (ix[0] - rx0, iy[0] - ry0, ix[1] - rx0, iy[1] - ry0))


def exact_iou(a, b):
    ax0, ay0, ax1, ay1 = (Fraction(v) for v in a)
    bx0, by0, bx1, by1 = (Fraction(v) for v in b)
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return Fraction(0)
    inter = iw * ih
    return inter / ((ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter)


def greedy_flags(dets, gts, threshold, class_id):
    """Literal greedy protocol over (box, class, conf) tuples, per image.

    Returns (confidence, flag) pairs in processing order and the GT count.
    """
    order = sorted(
        [k for k, d in enumerate(dets) if d[1] == class_id],
        key=lambda k: (-dets[k][2], k),
    )
    gt_idx = [k for k, g in enumerate(gts) if g[1] == class_id]
    used = set()
    out = []
    for k in order:
        candidates = []
        for g in gt_idx:
            if g in used:
                continue
            ov = exact_iou(dets[k][0], gts[g][0])
            if ov >= Fraction(threshold):
                candidates.append((-ov, g))
        if candidates:
            candidates.sort()
            used.add(candidates[0][1])
            out.append((dets[k][2], True))
        else:
            out.append((dets[k][2], False))
    return out, len(gt_idx)


def envelope_ap(flags, n_gt):
    """All-point AP by brute force: for each recall step, scan every later point."""
    points = []
    tp = 0
    for n, f in enumerate(flags, 1):
        tp += f
        points.append((Fraction(tp, n_gt), Fraction(tp, n)))
    total = Fraction(0)
    prev_recall = Fraction(0)
    for k, (r, _) in enumerate(points):
        if r > prev_recall:
            best = max(p for rr, p in points if rr >= r)
            total += (r - prev_recall) * best
            prev_recall = r
    return total


def dataset_ap(images, threshold, class_id):
    """images: list of (dets, gts) with dets=(box, cls, conf), gts=(box, cls)."""
    pooled = []
    n_gt = 0
    for idx, (dets, gts) in enumerate(images):
        flags, n = greedy_flags(dets, gts, threshold, class_id)
        pooled.extend((-c, idx, pos, f) for pos, (c, f) in enumerate(flags))
        n_gt += n
    pooled.sort()
    return envelope_ap([f for *_, f in pooled], n_gt)
