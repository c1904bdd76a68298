"""Result-level fusion branches (radar-camera tracking, lidar-camera merging)."""

from .lidar_camera import (
    FullyBehind,
    LidarCameraFusion,
    MatchLedger,
    MergedBox,
    box_match,
    merge_boxes,
    project_box_to_image,
)
from .radar_camera import (
    FusedObject,
    KalmanState,
    MatchedPair,
    PotentialObject,
    RadarCameraFusion,
    RadarRoi,
    RadarRoiParams,
    SingularInnovation,
    TrackState,
    TrackStatus,
    iou_match,
    kalman_predict,
    kalman_update,
    max_weight_assignment,
    radar_roi,
    track_update,
)

__all__ = [
    "FullyBehind", "FusedObject", "KalmanState", "LidarCameraFusion",
    "MatchLedger", "MatchedPair", "MergedBox", "PotentialObject",
    "RadarCameraFusion", "RadarRoi", "RadarRoiParams", "SingularInnovation",
    "TrackState", "TrackStatus", "box_match", "iou_match", "kalman_predict",
    "kalman_update", "max_weight_assignment", "merge_boxes",
    "project_box_to_image", "radar_roi", "track_update",
]
