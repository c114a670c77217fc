"""Score predictions against ground truth and render the metric tables.

Builds a small two-route dataset with deliberately imperfect predictions
and prints the per-route and per-video tables at tIoU > 0 and tIoU > 0.5.
Accuracy here is tp / (tp + fp + fn): true negatives are not counted, since
most holds in any given video are simply never used.
"""

from climbkit import Extremity, UsageInterval, VideoEval, evaluate

RH, LH = Extremity.RIGHT_HAND, Extremity.LEFT_HAND
RF, LF = Extremity.RIGHT_FOOT, Extremity.LEFT_FOOT


def iv(ext, hold, start, end):
    return UsageInterval(ext, hold, start, end)


videos = [
    VideoEval(
        "orange-p01", "orange",
        gt=(iv(RH, 0, 0, 199), iv(LH, 1, 150, 399), iv(RF, 2, 100, 499), iv(LF, 3, 120, 480)),
        pred=(iv(RH, 0, 0, 199),        # exact
              iv(LH, 1, 180, 400),      # slightly late
              iv(RF, 2, 350, 499),      # badly truncated: dies at tIoU > 0.5
              iv(RH, 5, 600, 700)),     # spurious
    ),
    VideoEval(
        "orange-p02", "orange",
        gt=(iv(RH, 0, 0, 250), iv(LF, 2, 50, 300)),
        pred=(iv(RH, 0, 0, 250), iv(LF, 2, 50, 300)),
    ),
    VideoEval(
        "green-p01", "green",
        gt=(iv(RH, 4, 0, 200), iv(LH, 5, 100, 350), iv(RF, 6, 0, 400)),
        pred=(iv(RH, 4, 10, 205), iv(LH, 5, 100, 350)),   # one foothold missed
    ),
]

report = evaluate(videos, thresholds=(0.0, 0.5))
print(report.render_tables())

print()
overall = report.slice(0.0)
strict = report.slice(0.5)
print(f"overall at tIoU>0:   tp={overall.values.tp} fp={overall.values.fp} "
      f"fn={overall.values.fn}  accuracy={overall.values.accuracy:.1%}")
print(f"overall at tIoU>0.5: tp={strict.values.tp} fp={strict.values.fp} "
      f"fn={strict.values.fn}  accuracy={strict.values.accuracy:.1%}")
print("\nraising the threshold turns loosely-aligned matches into FP+FN pairs,")
print("which is why the strict table is always worse.")
