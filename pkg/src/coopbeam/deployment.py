"""Scenario generation: two cooperating arrays serving users in a shared
volume.

Two deployment styles are supported. "small_cell" places two co-located
planar arrays above the region and packs spherical micro-cells on a cubic
lattice; co-channel users sit in cells kept a reuse distance apart, and
one interferer is deliberately re-drawn within a small angular offset of
the desired user as seen from the first array. "cell_free" scatters
access-point sub-arrays in the upper half of the region and splits them
between two processing hubs.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import (
    SPEED_OF_LIGHT,
    AnglePair,
    ArrayGeometry,
    angles_between,
    direction_cosines,
    planar_array,
)
from .capacity import VolumeSpec

_DEFAULT_WAVELENGTH_M = SPEED_OF_LIGHT / 73.5e9

SCENARIO_KINDS = ("small_cell", "cell_free")


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs for one deployment draw. nu counts all users, desired included."""

    kind: str = "small_cell"
    region_m: tuple[float, float, float] = (500.0, 500.0, 120.0)
    nu: int = 8
    k_db: float = 10.0
    wavelength_m: float = _DEFAULT_WAVELENGTH_M
    # small-cell deployment
    micro_cell_radius_m: float = 20.0
    reuse_distance_multiple: float = 4.0
    aa_rows: int = 8
    aa_cols: int = 8
    aa_height_m: float = 120.0
    aa_separation_m: float = 120.0
    # cell-free deployment
    na: int = 16
    ne_rows: int = 4
    ne_cols: int = 4
    # common
    position_error_var_m2: float = 0.0
    co_angle_interferer: bool | None = None
    co_angle_max_deg: float = 2.0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"kind must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        region = tuple(float(v) for v in self.region_m)
        if len(region) != 3 or any(not (v > 0 and math.isfinite(v)) for v in region):
            raise ValueError("region_m must be three positive extents")
        object.__setattr__(self, "region_m", region)
        if self.nu < 1:
            raise ValueError("nu must be >= 1")
        if not (self.wavelength_m > 0 and math.isfinite(self.wavelength_m)):
            raise ValueError("wavelength_m must be positive")
        if self.kind == "small_cell":
            r = self.micro_cell_radius_m
            if not (1.0 <= r <= min(region) / 2.0):
                raise ValueError(
                    "micro_cell_radius_m must lie in [1, min region extent / 2] "
                    "so a cell sphere fits inside the region"
                )
            if self.reuse_distance_multiple < 2.0:
                raise ValueError("reuse_distance_multiple must be >= 2 (cells must not overlap)")
            if self.aa_rows < 1 or self.aa_cols < 1:
                raise ValueError("aa_rows and aa_cols must be >= 1")
        else:
            if self.na < 2 or self.na % 2 != 0:
                raise ValueError("na must be an even count >= 2 so both hubs get equal elements")
            if self.ne_rows < 1 or self.ne_cols < 1:
                raise ValueError("ne_rows and ne_cols must be >= 1")
        if self.position_error_var_m2 < 0:
            raise ValueError("position_error_var_m2 must be >= 0")
        if not (0.0 <= self.co_angle_max_deg < 90.0):
            raise ValueError("co_angle_max_deg must be in [0, 90)")

    @property
    def element_spacing_m(self) -> float:
        return self.wavelength_m / 2.0

    @property
    def co_angle_enabled(self) -> bool:
        # the angular stress test is a small-cell default; opt-in for cell-free
        if self.co_angle_interferer is None:
            return self.kind == "small_cell"
        return self.co_angle_interferer


@dataclass(frozen=True, eq=False)
class Scenario:
    """One drawn deployment. Row 0 of the position arrays is the desired user.

    true_positions drive the channels; precoding_positions drive the
    precoders. They differ only after perturb_positions.
    """

    kind: str
    arrays: tuple[ArrayGeometry, ArrayGeometry]
    true_positions: np.ndarray
    precoding_positions: np.ndarray
    true_angles: tuple[np.ndarray, np.ndarray]
    region_m: tuple[float, float, float]
    micro_cell_radius_m: float | None = None
    reuse_factor: int | None = None

    @property
    def num_users(self) -> int:
        return self.true_positions.shape[0]

    def precoding_angles(self, array_index: int) -> np.ndarray:
        """(NU, 2) azimuth/zenith of every user's assumed position."""
        ref = self.arrays[array_index].reference
        return _angles_matrix(ref, self.precoding_positions)

    def volume_spec(self) -> VolumeSpec:
        if self.kind == "small_cell":
            return VolumeSpec(
                kind="small_cell",
                cell_diameter_m=2.0 * self.micro_cell_radius_m,
                reuse_factor=self.reuse_factor,
            )
        x, y, z = self.region_m
        return VolumeSpec(
            kind="cell_free",
            region_volume_m3=x * y * z,
            num_users=self.num_users,
        )


def _angles_matrix(ref, positions) -> np.ndarray:
    # vectorized angles_between; same atan2 conventions
    d = np.asarray(positions, dtype=float) - np.asarray(ref, dtype=float)
    horiz = np.hypot(d[:, 0], d[:, 1])
    if ((horiz == 0.0) & (d[:, 2] == 0.0)).any():
        raise ValueError("a user position coincides with the array reference")
    return np.column_stack([np.arctan2(d[:, 1], d[:, 0]), np.arctan2(horiz, d[:, 2])])


def _uniform_in_sphere(center, radius, rng) -> np.ndarray:
    direction = rng.standard_normal(3)
    norm = np.linalg.norm(direction)
    while norm == 0.0:
        direction = rng.standard_normal(3)
        norm = np.linalg.norm(direction)
    r = radius * rng.random() ** (1.0 / 3.0)
    return np.asarray(center, dtype=float) + direction / norm * r


@functools.lru_cache(maxsize=32)
def _small_cell_layout(cfg: ScenarioConfig):
    """Deterministic part of a small-cell draw: arrays, desired cell and the
    ordered co-channel cell centers (nearest first, pairwise reuse spacing)."""
    x, y, z = cfg.region_m
    r = cfg.micro_cell_radius_m
    spacing = cfg.element_spacing_m
    cx, cy = x / 2.0, y / 2.0
    left = planar_array(
        cfg.aa_rows, cfg.aa_cols, spacing, (cx - cfg.aa_separation_m / 2.0, cy, cfg.aa_height_m)
    )
    right = planar_array(
        cfg.aa_rows, cfg.aa_cols, spacing, (cx + cfg.aa_separation_m / 2.0, cy, cfg.aa_height_m)
    )

    # cubic lattice of sphere centers, pitch one cell diameter, anchored so
    # one center sits exactly at the region center; keeps the desired cell's
    # geometry identical across radii
    target = np.array([cx, cy, z / 2.0])
    axes = []
    for mid, extent in zip(target, (x, y, z)):
        k = np.arange(-int(extent // (2.0 * r)) - 1, int(extent // (2.0 * r)) + 2)
        vals = mid + 2.0 * r * k
        axes.append(vals[(vals >= r - 1e-9) & (vals <= extent - r + 1e-9)])
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    centers = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    order = np.lexsort(
        (centers[:, 2], centers[:, 1], centers[:, 0], np.linalg.norm(centers - target, axis=1))
    )
    desired_center = centers[order[0]]

    min_sep = cfg.reuse_distance_multiple * r
    dist = np.linalg.norm(centers - desired_center, axis=1)
    cand_order = np.lexsort((centers[:, 2], centers[:, 1], centers[:, 0], dist))
    kept: list[np.ndarray] = []
    for idx in cand_order:
        c = centers[idx]
        if np.linalg.norm(c - desired_center) < min_sep:
            continue
        if any(np.linalg.norm(c - k) < min_sep for k in kept):
            continue
        kept.append(c)
        if len(kept) >= cfg.nu - 1:
            break
    return left, right, desired_center, tuple(map(tuple, kept))


def small_cell_scenario(cfg: ScenarioConfig, rng: np.random.Generator) -> Scenario:
    """Draw one small-cell deployment.

    Users are uniform in their cell spheres. When the co-angle stress test
    is enabled and there is at least one interferer, interferer 1 is moved
    onto a ray from the first array within co_angle_max_deg of the desired
    user's bearing, at its own original range, then clamped to the region.
    """
    if cfg.kind != "small_cell":
        raise ValueError("small_cell_scenario needs cfg.kind == 'small_cell'")
    left, right, desired_center, co_centers = _small_cell_layout(cfg)
    centers = [np.asarray(desired_center)] + [np.asarray(c) for c in co_centers]
    users = np.vstack([_uniform_in_sphere(c, cfg.micro_cell_radius_m, rng) for c in centers])

    if cfg.co_angle_enabled and users.shape[0] >= 2 and cfg.co_angle_max_deg > 0:
        users[1] = _co_angle_position(
            left.reference, users[0], users[1], cfg.co_angle_max_deg, cfg.region_m, rng
        )

    return _finalize(cfg, left, right, users, reuse=len(centers))


def _co_angle_position(ref, desired_pos, original_pos, max_deg, region, rng) -> np.ndarray:
    base = angles_between(ref, desired_pos)
    lim = math.radians(max_deg)
    offset = rng.uniform(-lim, lim, size=2)
    ang = AnglePair(base.azimuth + offset[0], base.zenith + offset[1])
    rng_dist = float(np.linalg.norm(original_pos - ref))
    pos = np.asarray(ref, dtype=float) + rng_dist * direction_cosines(ang)
    return np.clip(pos, 0.0, np.asarray(region, dtype=float))


def cell_free_scenario(cfg: ScenarioConfig, rng: np.random.Generator) -> Scenario:
    """Draw one cell-free deployment.

    na access points land uniformly in the upper half of the region (by
    height), each carrying an ne_rows x ne_cols half-wavelength sub-array.
    Alternate access points go to alternate hubs; each hub's phase
    reference is the centroid of its access points. Users are uniform in
    the whole region.
    """
    if cfg.kind != "cell_free":
        raise ValueError("cell_free_scenario needs cfg.kind == 'cell_free'")
    x, y, z = cfg.region_m
    lo = np.array([0.0, 0.0, z / 2.0])
    hi = np.array([x, y, z])
    ap_centers = lo + rng.random((cfg.na, 3)) * (hi - lo)

    spacing = cfg.element_spacing_m
    subarrays = [planar_array(cfg.ne_rows, cfg.ne_cols, spacing, c) for c in ap_centers]
    groups = (subarrays[0::2], subarrays[1::2])
    arrays = []
    for group in groups:
        elements = np.vstack([sub.elements for sub in group])
        hub = np.mean([sub.reference for sub in group], axis=0)
        arrays.append(ArrayGeometry(elements, hub))
    left, right = arrays

    users = rng.random((cfg.nu, 3)) * np.array([x, y, z])
    if cfg.co_angle_enabled and users.shape[0] >= 2 and cfg.co_angle_max_deg > 0:
        users[1] = _co_angle_position(
            left.reference, users[0], users[1], cfg.co_angle_max_deg, cfg.region_m, rng
        )
    return _finalize(cfg, left, right, users, reuse=None)


def _finalize(cfg, left, right, users, reuse) -> Scenario:
    users = np.asarray(users, dtype=float)
    return Scenario(
        kind=cfg.kind,
        arrays=(left, right),
        true_positions=users,
        precoding_positions=users.copy(),
        true_angles=(
            _angles_matrix(left.reference, users),
            _angles_matrix(right.reference, users),
        ),
        region_m=cfg.region_m,
        micro_cell_radius_m=cfg.micro_cell_radius_m if cfg.kind == "small_cell" else None,
        reuse_factor=reuse,
    )


def draw_scenario(cfg: ScenarioConfig, rng: np.random.Generator) -> Scenario:
    if cfg.kind == "small_cell":
        return small_cell_scenario(cfg, rng)
    return cell_free_scenario(cfg, rng)


def perturb_positions(scen: Scenario, err_var_m2: float, rng: np.random.Generator) -> Scenario:
    """Gaussian per-axis position error applied to the precoding positions.

    True positions, and hence the channels, are untouched; only what the
    precoders believe changes.
    """
    if err_var_m2 < 0:
        raise ValueError("err_var_m2 must be >= 0")
    if err_var_m2 == 0:
        return scen
    noise = math.sqrt(err_var_m2) * rng.standard_normal(scen.true_positions.shape)
    return replace(scen, precoding_positions=scen.true_positions + noise)


# ---------------------------------------------------------------------------
# serialization (lossless: json float repr round-trips exactly)
# ---------------------------------------------------------------------------

def scenario_to_json(scen: Scenario) -> str:
    payload = {
        "kind": scen.kind,
        "region_m": list(scen.region_m),
        "micro_cell_radius_m": scen.micro_cell_radius_m,
        "reuse_factor": scen.reuse_factor,
        "arrays": [
            {"elements": arr.elements.tolist(), "reference": arr.reference.tolist()}
            for arr in scen.arrays
        ],
        "true_positions": scen.true_positions.tolist(),
        "precoding_positions": scen.precoding_positions.tolist(),
        "true_angles": [a.tolist() for a in scen.true_angles],
    }
    return json.dumps(payload)


def scenario_from_json(text: str) -> Scenario:
    payload = json.loads(text)
    arrays = tuple(
        ArrayGeometry(np.asarray(a["elements"]), np.asarray(a["reference"]))
        for a in payload["arrays"]
    )
    return Scenario(
        kind=payload["kind"],
        arrays=arrays,
        true_positions=np.asarray(payload["true_positions"], dtype=float),
        precoding_positions=np.asarray(payload["precoding_positions"], dtype=float),
        true_angles=tuple(np.asarray(a, dtype=float) for a in payload["true_angles"]),
        region_m=tuple(payload["region_m"]),
        micro_cell_radius_m=payload["micro_cell_radius_m"],
        reuse_factor=payload["reuse_factor"],
    )
