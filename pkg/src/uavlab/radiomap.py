"""Radio propagation and SINR mapping over a synthetic city.

Power-law path loss with separate LoS/NLoS laws, a three-sector antenna
model (element pattern plus array factor), Nakagami small-scale fading,
and best-server SINR with co-channel interference from all other base
stations. ``build_radio_map`` materializes the deterministic SINR field
on a grid at the UAV's flight altitude; the grid file round-trips
losslessly through ``save_radio_map``/``load_radio_map``.

Angles at the public interfaces are degrees; distances are meters;
powers are watts unless a name says dB.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional, Sequence, Tuple

import numpy as np

from .units import linear_to_db, wrap_angle_deg

if TYPE_CHECKING:  # pragma: no cover
    from .cityworld import CityMap

RADIO_MAP_FORMAT_VERSION = 1


class RadioMapFormatError(ValueError):
    """Raised when a radio-map file is malformed or has the wrong version."""


@dataclass(frozen=True)
class Building:
    """Axis-aligned box obstacle: footprint rectangle plus a roof height."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    height: float

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate footprint: {self}")
        if self.height <= 0.0:
            raise ValueError(f"building height must be positive, got {self.height}")


@dataclass(frozen=True)
class BaseStation:
    """Ground base station with three downtilted sectors.

    ``tx_power_w`` is per sector. A power of exactly 0.0 marks a station
    disabled by the emergency scenario; it then contributes neither
    signal nor interference.
    """

    x: float
    y: float
    height: float
    tx_power_w: float = 40.0
    sector_azimuths_deg: Tuple[float, float, float] = (0.0, 120.0, 240.0)
    downtilt_deg: float = 10.0

    def __post_init__(self) -> None:
        if self.tx_power_w < 0.0:
            raise ValueError(f"tx power must be >= 0, got {self.tx_power_w}")
        if not (5.0 <= self.height <= 25.0):
            raise ValueError(f"BS height must be within [5, 25] m, got {self.height}")
        if len(self.sector_azimuths_deg) != 3:
            raise ValueError("a base station has exactly 3 sectors")
        wrapped = [az % 360.0 for az in self.sector_azimuths_deg]
        if len(set(wrapped)) != 3:
            raise ValueError(f"sector azimuths must be distinct mod 360: {self.sector_azimuths_deg}")

    @property
    def antenna_pos(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.height)


@dataclass(frozen=True)
class PropagationParams:
    """Channel-model constants.

    Defaults are typical urban-macro values; everything is overridable
    through the environment config.
    """

    x_los: float = 1e-4            # linear path-loss intercept at 1 m, LoS
    x_nlos: float = 10.0 ** -3.5   # linear intercept at 1 m, NLoS
    alpha_los: float = 2.2
    alpha_nlos: float = 3.5
    g_max_db: float = 8.0          # element peak gain
    theta_3db_deg: float = 65.0
    phi_3db_deg: float = 65.0
    sla_v_db: float = 30.0         # vertical sidelobe limit
    a_m_db: float = 30.0           # front-to-back cap
    n_elements: int = 8
    nakagami_m_los: float = 3.0
    nakagami_m_nlos: float = 1.0
    noise_density_w_hz: float = 4e-21
    bandwidth_hz: float = 10e6
    outage_threshold_db: float = 0.0

    def __post_init__(self) -> None:
        if not (self.alpha_nlos >= self.alpha_los > 0.0):
            raise ValueError("need alpha_nlos >= alpha_los > 0")
        if self.x_los <= 0.0 or self.x_nlos <= 0.0:
            raise ValueError("path-loss intercepts must be positive")
        if self.nakagami_m_los < 0.5 or self.nakagami_m_nlos < 0.5:
            raise ValueError("Nakagami shape must be >= 0.5")
        if self.bandwidth_hz <= 0.0 or self.noise_density_w_hz <= 0.0:
            raise ValueError("noise density and bandwidth must be positive")
        for name in ("g_max_db", "theta_3db_deg", "phi_3db_deg", "sla_v_db",
                     "a_m_db", "outage_threshold_db"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.n_elements < 1:
            raise ValueError("array needs at least one element")

    @property
    def noise_power_w(self) -> float:
        return self.noise_density_w_hz * self.bandwidth_hz


@dataclass
class RadioMap:
    """Grid of best-server SINR (dB) at a fixed flight altitude."""

    origin: Tuple[float, float]
    cell_size: float
    dims: Tuple[int, int]
    altitude: float
    outage_threshold_db: float
    sinr_db: np.ndarray          # shape (nx, ny)
    outage: np.ndarray = field(default=None)  # bool, shape (nx, ny)

    def __post_init__(self) -> None:
        if self.cell_size <= 0.0:
            raise ValueError("cell_size must be positive")
        nx, ny = self.dims
        if self.sinr_db.shape != (nx, ny):
            raise ValueError(f"sinr grid shape {self.sinr_db.shape} != dims {self.dims}")
        if self.outage is None:
            self.outage = self.sinr_db <= self.outage_threshold_db

    def cell_index(self, x: float, y: float) -> Tuple[int, int]:
        """Containing cell of a position; boundary positions clamp inward."""
        nx, ny = self.dims
        ix = int((x - self.origin[0]) // self.cell_size)
        iy = int((y - self.origin[1]) // self.cell_size)
        return (min(max(ix, 0), nx - 1), min(max(iy, 0), ny - 1))

    def cell_center(self, ix: int, iy: int) -> Tuple[float, float]:
        return (self.origin[0] + (ix + 0.5) * self.cell_size,
                self.origin[1] + (iy + 0.5) * self.cell_size)

    def sinr_at_pos(self, x: float, y: float) -> float:
        ix, iy = self.cell_index(x, y)
        return float(self.sinr_db[ix, iy])

    def outage_at_pos(self, x: float, y: float) -> bool:
        ix, iy = self.cell_index(x, y)
        return bool(self.outage[ix, iy])

    def outage_fraction(self) -> float:
        return float(np.mean(self.outage))


# ---------------------------------------------------------------------------
# path loss
# ---------------------------------------------------------------------------

def path_loss(d: float, los: bool, p: PropagationParams) -> float:
    """Power-law path gain X * d^-alpha (linear factor, not dB).

    Strictly decreasing in distance; LoS and NLoS use separate
    intercepts and exponents.
    """
    if d <= 0.0:
        raise ValueError(f"distance must be positive, got {d}")
    if los:
        return p.x_los * d ** (-p.alpha_los)
    return p.x_nlos * d ** (-p.alpha_nlos)


def log_distance_path_loss(d: float, l0_db: float, alpha: float, d0: float = 1.0) -> float:
    """Log-distance loss in dB: L0 + 10*alpha*log10(d/d0)."""
    if d0 <= 0.0:
        raise ValueError(f"reference distance must be positive, got {d0}")
    if d < d0:
        raise ValueError(f"distance {d} below reference distance {d0}")
    return l0_db + 10.0 * alpha * math.log10(d / d0)


def simple_rss(grid_point: Sequence[float], tx: BaseStation, l0_db: float,
               alpha: float, d0: float = 1.0, noise_bias_db: float = 0.0) -> float:
    """Received signal strength (dBm) under the plain log-distance backend.

    RSS = P_t - L(d) + noise_bias, with the transmit power converted from
    watts to dBm and the mean noise level folded in as a constant dB bias.
    """
    gx, gy, gz = grid_point
    d = math.sqrt((gx - tx.x) ** 2 + (gy - tx.y) ** 2 + (gz - tx.height) ** 2)
    tx_dbm = linear_to_db(tx.tx_power_w * 1000.0)
    return tx_dbm - log_distance_path_loss(d, l0_db, alpha, d0) + noise_bias_db


# ---------------------------------------------------------------------------
# line of sight
# ---------------------------------------------------------------------------

class _BuildingSlabs:
    """Building boxes as min/max corner arrays for vectorized occlusion tests."""

    def __init__(self, buildings: Iterable[Building]):
        blds = list(buildings)
        self.count = len(blds)
        self.lo = np.array([[b.x_min, b.y_min, 0.0] for b in blds], dtype=float).reshape(-1, 3)
        self.hi = np.array([[b.x_max, b.y_max, b.height] for b in blds], dtype=float).reshape(-1, 3)

    def segment_blocked(self, p0: Sequence[float], p1: Sequence[float]) -> bool:
        """True if the 3D segment touches any box (boundary contact included)."""
        if self.count == 0:
            return False
        a = np.asarray(p0, dtype=float)
        seg = np.asarray(p1, dtype=float) - a
        t_lo = np.zeros(self.count)
        t_hi = np.ones(self.count)
        alive = np.ones(self.count, dtype=bool)
        for axis in range(3):
            d = seg[axis]
            lo = self.lo[:, axis]
            hi = self.hi[:, axis]
            if d == 0.0:
                # parallel to this slab: box survives only if we are inside it
                alive &= (a[axis] >= lo) & (a[axis] <= hi)
            else:
                t1 = (lo - a[axis]) / d
                t2 = (hi - a[axis]) / d
                t_lo = np.maximum(t_lo, np.minimum(t1, t2))
                t_hi = np.minimum(t_hi, np.maximum(t1, t2))
        return bool(np.any(alive & (t_lo <= t_hi)))


def is_los(uav_pos: Sequence[float], bs_antenna_pos: Sequence[float], city: "CityMap") -> bool:
    """True iff no building box intersects the segment between the points."""
    return not _BuildingSlabs(city.buildings).segment_blocked(uav_pos, bs_antenna_pos)


# ---------------------------------------------------------------------------
# antenna model
# ---------------------------------------------------------------------------

def element_pattern(theta_deg: float, phi_deg: float, p: PropagationParams) -> float:
    """Sector element gain (dB) from the two-cut quadratic pattern.

    theta is the zenith angle in the antenna frame (90 = boresight
    horizontal), phi the azimuth offset from boresight. Never exceeds
    the peak gain.
    """
    a_v = -min(12.0 * ((theta_deg - 90.0) / p.theta_3db_deg) ** 2, p.sla_v_db)
    a_h = -min(12.0 * (phi_deg / p.phi_3db_deg) ** 2, p.a_m_db)
    return p.g_max_db - min(-(a_v + a_h), p.a_m_db)


def steering_vector(theta_deg: float, n: int) -> np.ndarray:
    """Unit-norm steering vector of a vertical half-wavelength array."""
    psi = math.pi * math.cos(math.radians(theta_deg))
    scale = 1.0 / math.sqrt(n)
    return np.array([scale * cmath.exp(1j * psi * k) for k in range(n)])


def boresight_weights(n: int) -> np.ndarray:
    """Beam vector phase-aligned to the boresight direction (no steering)."""
    return np.full(n, 1.0 / math.sqrt(n), dtype=complex)


def array_factor(theta_deg: float, phi_deg: float, n: int,
                 weights: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> float:
    """Array gain in dB: 10*log10(1 + |a . w|). Always >= 0 dB.

    By default the amplitude vector is the steering vector for
    ``theta`` and the beam vector is boresight-aligned, so the factor
    peaks when theta crosses boresight. Custom ``(a, w)`` vectors may
    be supplied; both must have length ``n``.
    """
    if weights is not None:
        a, w = (np.asarray(weights[0]), np.asarray(weights[1]))
        if len(a) != n or len(w) != n:
            raise ValueError(f"amplitude/beam vectors must have length {n}")
    else:
        a = steering_vector(theta_deg, n)
        w = boresight_weights(n)
    return 10.0 * math.log10(1.0 + abs(complex(np.dot(a, w))))


def sector_angles(bs: BaseStation, sector: int, uav_pos: Sequence[float]) -> Tuple[float, float]:
    """Antenna-frame (theta, phi) of the UAV as seen from one sector.

    theta is the zenith angle shifted by the mechanical downtilt, phi the
    azimuth offset from the sector boresight, wrapped to [-180, 180).
    """
    if sector not in (0, 1, 2):
        raise ValueError(f"sector index must be 0, 1 or 2, got {sector}")
    dx = uav_pos[0] - bs.x
    dy = uav_pos[1] - bs.y
    dz = uav_pos[2] - bs.height
    horiz = math.hypot(dx, dy)
    theta = math.degrees(math.atan2(horiz, dz))  # 0 = straight up, 90 = horizon
    azimuth = math.degrees(math.atan2(dy, dx))
    phi = wrap_angle_deg(azimuth - bs.sector_azimuths_deg[sector])
    return (theta - bs.downtilt_deg, phi)


def antenna_gain(bs: BaseStation, sector: int, uav_pos: Sequence[float],
                 p: PropagationParams) -> float:
    """Total sector gain toward the UAV: element pattern plus array factor (dB)."""
    theta, phi = sector_angles(bs, sector, uav_pos)
    return element_pattern(theta, phi, p) + array_factor(theta, phi, p.n_elements)


# ---------------------------------------------------------------------------
# fading
# ---------------------------------------------------------------------------

def sample_fading(m: float, rng: np.random.Generator) -> float:
    """Draw a unit-mean Nakagami-m power coefficient (Gamma(m, 1/m))."""
    if m < 0.5:
        raise ValueError(f"Nakagami shape must be >= 0.5, got {m}")
    return float(rng.gamma(shape=m, scale=1.0 / m))


# ---------------------------------------------------------------------------
# SINR
# ---------------------------------------------------------------------------

class SinrModel:
    """Bundles a city and channel constants; precomputes building slabs.

    All methods are pure given their arguments, so one model instance can
    be shared freely across threads for deterministic evaluation.
    """

    def __init__(self, city: "CityMap", params: PropagationParams):
        self.city = city
        self.params = params
        self._slabs = _BuildingSlabs(city.buildings)

    def link_los(self, uav_pos: Sequence[float], bs: BaseStation) -> bool:
        return not self._slabs.segment_blocked(uav_pos, bs.antenna_pos)

    def received_power_w(self, uav_pos: Sequence[float], bs: BaseStation, sector: int,
                         fading: float = 1.0) -> float:
        """Linear received power from one sector, 0.0 if the BS is disabled."""
        if bs.tx_power_w == 0.0:
            return 0.0
        dx = uav_pos[0] - bs.x
        dy = uav_pos[1] - bs.y
        dz = uav_pos[2] - bs.height
        d3 = math.sqrt(dx * dx + dy * dy + dz * dz)
        los = self.link_los(uav_pos, bs)
        gain_db = antenna_gain(bs, sector, uav_pos, self.params)
        return bs.tx_power_w * 10.0 ** (gain_db / 10.0) * path_loss(d3, los, self.params) * fading

    def sinr_at(self, uav_pos: Sequence[float], fading_mode: str = "deterministic",
                rng: Optional[np.random.Generator] = None) -> Tuple[float, int, int]:
        """Best-server SINR (dB) plus the serving (bs, sector) indices.

        The serving link is the strongest received power over every BS and
        sector (ties to the lowest index pair); interference sums all
        sectors of every other base station. ``fading_mode`` is
        "deterministic" (coefficient 1) or "sampled" (Nakagami draws,
        requires ``rng``).
        """
        city, p = self.city, self.params
        if not (0.0 <= uav_pos[0] <= city.extent[0] and 0.0 <= uav_pos[1] <= city.extent[1]):
            raise ValueError(f"position {uav_pos} outside map extent {city.extent}")
        if fading_mode not in ("deterministic", "sampled"):
            raise ValueError(f"unknown fading mode: {fading_mode}")
        if fading_mode == "sampled" and rng is None:
            raise ValueError("sampled fading needs an RNG")

        best_power = -1.0
        best_bs = 0
        best_sector = 0
        per_bs_total = []
        for i, bs in enumerate(city.base_stations):
            total = 0.0
            if bs.tx_power_w == 0.0:
                per_bs_total.append(0.0)
                continue
            los = self.link_los(uav_pos, bs)
            m = p.nakagami_m_los if los else p.nakagami_m_nlos
            for j in range(3):
                fading = 1.0 if fading_mode == "deterministic" else sample_fading(m, rng)
                dx = uav_pos[0] - bs.x
                dy = uav_pos[1] - bs.y
                dz = uav_pos[2] - bs.height
                d3 = math.sqrt(dx * dx + dy * dy + dz * dz)
                gain_db = antenna_gain(bs, j, uav_pos, p)
                p_rx = bs.tx_power_w * 10.0 ** (gain_db / 10.0) * path_loss(d3, los, p) * fading
                total += p_rx
                if p_rx > best_power:
                    best_power = p_rx
                    best_bs = i
                    best_sector = j
            per_bs_total.append(total)

        if best_power <= 0.0:
            return (-math.inf, 0, 0)
        interference = sum(t for i, t in enumerate(per_bs_total) if i != best_bs)
        sinr = best_power / (interference + p.noise_power_w)
        return (linear_to_db(sinr), best_bs, best_sector)


def sinr_at(uav_pos: Sequence[float], city: "CityMap", p: PropagationParams,
            fading_mode: str = "deterministic",
            rng: Optional[np.random.Generator] = None) -> Tuple[float, int, int]:
    """One-shot best-server SINR query; see :meth:`SinrModel.sinr_at`."""
    return SinrModel(city, p).sinr_at(uav_pos, fading_mode, rng)


def outage(sinr_db: float, threshold_db: float) -> bool:
    """Outage indicator: SINR at or below the threshold (inclusive)."""
    return sinr_db <= threshold_db


# ---------------------------------------------------------------------------
# map materialization and persistence
# ---------------------------------------------------------------------------

def build_radio_map(city: "CityMap", p: PropagationParams, altitude: float,
                    cell_size: float) -> RadioMap:
    """Evaluate deterministic SINR at every cell center of the city grid.

    Pure function of its inputs: identical arguments produce bitwise
    identical grids.
    """
    ex, ey = city.extent
    nx = ex / cell_size
    ny = ey / cell_size
    if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
        raise ValueError(f"cell size {cell_size} does not divide extent {city.extent}")
    nx, ny = int(round(nx)), int(round(ny))
    top = max((b.height for b in city.buildings), default=0.0)
    if altitude <= top:
        raise ValueError(f"altitude {altitude} not above tallest building ({top} m)")

    model = SinrModel(city, p)
    sinr = np.empty((nx, ny), dtype=float)
    for ix in range(nx):
        x = (ix + 0.5) * cell_size
        for iy in range(ny):
            y = (iy + 0.5) * cell_size
            sinr[ix, iy], _, _ = model.sinr_at((x, y, altitude))
    return RadioMap(origin=(0.0, 0.0), cell_size=cell_size, dims=(nx, ny),
                    altitude=altitude, outage_threshold_db=p.outage_threshold_db,
                    sinr_db=sinr)


def save_radio_map(rmap: RadioMap, path: str) -> None:
    """Write the map as a versioned JSON text file, full float precision."""
    doc = {
        "format_version": RADIO_MAP_FORMAT_VERSION,
        "origin": [float(rmap.origin[0]), float(rmap.origin[1])],
        "cell_size": float(rmap.cell_size),
        "dims": [int(rmap.dims[0]), int(rmap.dims[1])],
        "altitude": float(rmap.altitude),
        "outage_threshold_db": float(rmap.outage_threshold_db),
        "sinr_db": [float(v) for v in rmap.sinr_db.reshape(-1)],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_radio_map(path: str) -> RadioMap:
    """Read a map file; the outage grid is recomputed, never stored."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise RadioMapFormatError(f"malformed radio-map file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise RadioMapFormatError(f"radio-map file {path} is not a JSON object")
    version = doc.get("format_version")
    if version != RADIO_MAP_FORMAT_VERSION:
        raise RadioMapFormatError(
            f"unsupported radio-map format version {version!r} in {path}")
    try:
        dims = (int(doc["dims"][0]), int(doc["dims"][1]))
        values = doc["sinr_db"]
        if len(values) != dims[0] * dims[1]:
            raise RadioMapFormatError(
                f"{path}: expected {dims[0] * dims[1]} cells, found {len(values)}")
        sinr = np.array(values, dtype=float).reshape(dims)
        return RadioMap(origin=(float(doc["origin"][0]), float(doc["origin"][1])),
                        cell_size=float(doc["cell_size"]), dims=dims,
                        altitude=float(doc["altitude"]),
                        outage_threshold_db=float(doc["outage_threshold_db"]),
                        sinr_db=sinr)
    except (KeyError, TypeError, IndexError) as exc:
        raise RadioMapFormatError(f"radio-map file {path} missing field: {exc}") from exc
