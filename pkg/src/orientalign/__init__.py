"""Orientation-alignment toolkit: mesh canonicalization, Chamfer-based
alignment checks, template pose estimation, and arrow-based placement."""

from .geometry import (
    Plane,
    Ray,
    ViewLabel,
    align_vectors,
    fit_plane_least_squares,
    front_direction_error_deg,
    pca_align,
    pixel_to_ray,
    ray_plane_intersect,
    rotation_error_deg,
    rotation_from_axis_angle,
    yaw_for_label,
    yaw_rotation,
)
from .meshio import (
    FORWARD_AXIS,
    UP_AXIS,
    MeshError,
    TriMesh,
    load_mesh,
    normalize_mesh,
    parse_obj,
    parse_ply,
    save_mesh,
    write_obj,
    write_ply,
)
from .metrics import (
    EvalRecord,
    MetricsReport,
    aggregate_metrics,
    chamfer_distance,
    flag_misalignment,
    sample_surface,
)
from .placement import (
    Arrow2D,
    Arrow3D,
    DepthMap,
    Placement,
    SceneBundle,
    plan_placement,
    plan_placement_3d,
    read_dmap,
    render_placement_preview,
    unproject_depth,
    write_dmap,
)
from .pose import (
    GrayscaleDescriptor,
    estimate_orientation,
    evaluate_estimator,
    make_grid,
    sample_gt_rotation,
)
from .render import (
    Camera,
    CameraIntrinsics,
    evaluation_camera,
    orthogonal_four_views,
    render,
    six_canonical_views,
)
from .vlm import VlmConfig, VlmVerdict, build_prompt, canonicalize_with_vlm, recognize_front_view

__version__ = "0.1.0"
