"""Naive reference implementations: exhaustive nested loops built only on
point_similarity, np.max, and np.mean.  These define expected values for the
vectorized matchers and scorers and deliberately share no search code with
them."""

import numpy as np

from scp.features import point_similarity


def naive_forward(tmpl, p_t, target):
    """(similarity, x, y) by scanning every target pixel."""
    best = None
    for y in range(target.image_height):
        for x in range(target.image_width):
            s = point_similarity(tmpl, p_t, target, (x, y))
            if best is None or s > best[0]:
                best = (s, x, y)
    return best


def naive_forward_multi(tmpls, pts, target):
    """(similarity, template_index, x, y) over all (template, pixel) pairs."""
    best = None
    for m, (tmpl, p) in enumerate(zip(tmpls, pts)):
        s, x, y = naive_forward(tmpl, p, target)
        if best is None or s > best[0]:
            best = (s, m, x, y)
    return best


def naive_reverse(target, q, tmpls):
    """(similarity, template_index, x, y) over all pixels of all templates."""
    best = None
    for m, tmpl in enumerate(tmpls):
        for y in range(tmpl.image_height):
            for x in range(tmpl.image_width):
                s = point_similarity(tmpl, (x, y), target, q)
                if best is None or s > best[0]:
                    best = (s, m, x, y)
    return best


def naive_representative_score(template_ids, dataset):
    """Four-level loop over (image, keypoint, template, template pixel)."""
    per_image = []
    for img_id, (fm, kps) in dataset.items():
        sims = []
        for q in kps.coords():
            best = None
            for tid in template_ids:
                tmpl = dataset[tid][0]
                for y in range(tmpl.image_height):
                    for x in range(tmpl.image_width):
                        s = point_similarity(tmpl, (x, y), fm, q)
                        if best is None or s > best:
                            best = s
            sims.append(best)
        per_image.append(float(np.mean(np.array(sims))))
    return float(np.mean(np.array(per_image)))


def naive_landmark_score(template_ids, dataset):
    """Four-level loop over (image, landmark, template, image pixel)."""
    per_image = []
    for img_id, (fm, lms) in dataset.items():
        sims = []
        for l in range(len(lms)):
            best = None
            for tid in template_ids:
                tmpl, tlms = dataset[tid]
                px = int(np.floor(tlms.points[l, 0] + 0.5))
                py = int(np.floor(tlms.points[l, 1] + 0.5))
                for y in range(fm.image_height):
                    for x in range(fm.image_width):
                        s = point_similarity(tmpl, (px, py), fm, (x, y))
                        if best is None or s > best:
                            best = s
            sims.append(best)
        per_image.append(float(np.mean(np.array(sims))))
    return float(np.mean(np.array(per_image)))
