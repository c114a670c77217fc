"""Areas of interest and wall calibration, step by step.

Shows how the limb overlap boxes are built for wrist, toe, and ankle
keypoints, and how the image-to-wall homography is estimated from the four
reference points and then used for real-world distances.
"""

import numpy as np

from climbkit import (
    AoiConfig,
    FootAnchorKind,
    Point2,
    estimate_homography,
    foot_aoi,
    hand_aoi,
    project,
    reprojection_error,
    wall_distance,
)

# --- limb areas of interest -------------------------------------------------
# Defaults are calibrated for 720x1280 portrait video and scale with height.
aoi = AoiConfig()
wrist = Point2(360.0, 500.0)
print("hand AOI around wrist", (wrist.x, wrist.y), "->", hand_aoi(wrist, aoi))

ankle = Point2(300.0, 1000.0)
print("toe AOI   ->", foot_aoi(ankle, FootAnchorKind.TOE, aoi))
print("ankle AOI ->", foot_aoi(ankle, FootAnchorKind.ANKLE, aoi))
print("(the ankle box is much larger and sits entirely below the keypoint,")
print(" because toes wander far from an ankle but never above it)\n")

half = aoi.scaled_for_height(640)
print("at half the frame height every extent halves:", half.hand_half_extent, "px\n")

# --- homography calibration ---------------------------------------------------
# Four reference points: image pixels on the left, wall centimeters on the right.
image_pts = [Point2(60, 1180), Point2(660, 1175), Point2(650, 90), Point2(70, 95)]
wall_pts = [Point2(0, 0), Point2(300, 0), Point2(300, 850), Point2(0, 850)]

h = estimate_homography(image_pts, wall_pts)
print("estimated homography:")
print(np.array(h.as_rows()).round(4))
print("reprojection error over the 4 corners:",
      reprojection_error(h, image_pts, wall_pts), "px")

center = Point2(360, 640)
print("image center projects to", project(h, center), "on the wall (cm)")
print("distance between two image points, measured on the wall:",
      round(wall_distance(h, Point2(360, 640), Point2(360, 400)), 2), "cm")
