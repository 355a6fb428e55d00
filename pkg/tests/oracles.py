"""Independent reference implementations used to check the metric engine.

Everything here is written as plain, step-by-step loops that restate the
definitions directly, trading speed for obviousness. Nothing imports from
plateflow's metrics module.
"""

from __future__ import annotations


def box_iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


def replay_greedy_match(
    preds: list[tuple[tuple[float, float, float, float], int, float]],
    gts: list[tuple[int, tuple[float, float, float, float]]],
    threshold: float,
) -> list[tuple[bool, int]]:
    """Replay the matching definition one step at a time.

    ``preds`` are (box, class_id, confidence) triples. Returns, for each
    prediction in confidence-descending order (ties by x1, then y1, then
    class id), whether it is a true positive and which ground-truth index it
    claimed (-1 when none).
    """
    order = sorted(
        range(len(preds)),
        key=lambda i: (-preds[i][2], preds[i][0][0], preds[i][0][1], preds[i][1]),
    )
    claimed = [False] * len(gts)
    outcomes = []
    for pred_index in order:
        box, class_id, _conf = preds[pred_index]
        best_iou = 0.0
        best_gt = -1
        for gt_index, (gt_class, gt_box) in enumerate(gts):
            if gt_class != class_id:
                continue
            if claimed[gt_index]:
                continue
            value = box_iou(box, gt_box)
            if value > best_iou:
                best_iou = value
                best_gt = gt_index
        if best_gt != -1 and best_iou >= threshold:
            claimed[best_gt] = True
            outcomes.append((True, best_gt))
        else:
            outcomes.append((False, -1))
    return outcomes


def exact_all_points_ap(flags: list[bool], confidences: list[float], n_gt: int) -> float:
    """Exact area under the right-max precision envelope, no sampling.

    ``flags`` marks true positives. Detections are walked in confidence
    descending order; the area is accumulated over every recall increment.
    """
    if n_gt <= 0:
        raise ValueError("AP needs at least one ground-truth instance")
    order = sorted(range(len(flags)), key=lambda i: -confidences[i])
    precisions = []
    recalls = []
    tp = 0
    fp = 0
    for i in order:
        if flags[i]:
            tp += 1
        else:
            fp += 1
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_gt)
    # Right-max envelope: precision at each point becomes the best achieved
    # at that recall or beyond.
    for i in range(len(precisions) - 2, -1, -1):
        if precisions[i + 1] > precisions[i]:
            precisions[i] = precisions[i + 1]
    area = 0.0
    previous_recall = 0.0
    for precision, recall in zip(precisions, recalls):
        if recall > previous_recall:
            area += (recall - previous_recall) * precision
            previous_recall = recall
    return area


def summed_cls_loss(y: list[float], p: list[float]) -> float:
    """Direct summation of the cross-entropy definition."""
    import math

    total = 0.0
    for y_i, p_i in zip(y, p):
        if y_i != 0.0:
            total += -(y_i * math.log(p_i))
    return total


def summed_bbox_loss(coords: list[float], coords_hat: list[float]) -> float:
    total = 0.0
    for a, b in zip(coords, coords_hat):
        diff = a - b
        total += diff * diff
    return total
