"""Dataset summary tables from usage annotations.

Generates a small synthetic annotation set (two routes, several videos) and
prints the duration / usage-count / occlusion tables. With the published
climbing dataset converted into the toolkit's formats, the same call
reproduces its summary statistics (see also `climbkit stats`).
"""

import random

from climbkit import Extremity, UsageInterval, VideoAnnotations, compute_stats

rng = random.Random(2)
videos = []
for route, base_frames in (("orange", 1400), ("green", 2100)):
    for participant in range(1, 6):
        usages = []
        frame = 0
        n_frames = base_frames + rng.randrange(600)
        while frame < n_frames - 200:
            ext = rng.choice(list(Extremity))
            start = frame + rng.randrange(10, 60)
            end = start + rng.randrange(40, 220)
            occluded = ()
            if ext.kind.value == "h" and rng.random() < 0.5:
                a = rng.randrange(start, end)
                occluded = ((a, min(end, a + rng.randrange(5, 80))),)
            usages.append(UsageInterval(ext, rng.randrange(12), start, end, occluded))
            frame = end
        videos.append(
            VideoAnnotations(f"{route}-p{participant:02d}", route, n_frames, tuple(usages))
        )

report = compute_stats(videos, fps=25.0)
print(report.render_tables())

print()
print("notes:")
print(" - usage duration counts inclusive frame spans: (end - start + 1) / fps")
print(" - occlusion is the unweighted mean of per-usage occlusion percentages,")
print("   which is why hand occlusion dominates (hands hide behind the torso)")
print(" - pass occlusion_weighting='frame_weighted' or inclusive_spans=False")
print("   to compute_stats() for the alternative conventions")
