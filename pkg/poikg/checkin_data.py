"""
Check-in logs: parsing, time slots, regions, the date split, home locations and
frequency matrices.
"""

import argparse
import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, field_validator
from sklearn.cluster import KMeans

import poikg
from poikg.config import ConfigSection
from poikg.errors import (
    CheckinFormatError,
    ConfigError,
    DataError,
    MissingCoordinatesError,
    RegionError,
    SplitError,
)

SECONDS_PER_DAY = 86400
SECONDS_PER_HOUR = 3600
CHECKIN_FIELDS = ("user_id", "poi_id", "lat", "lon", "timestamp", "category")
REQUIRED_FIELDS = CHECKIN_FIELDS[:5]
# Expected share of train records around the default 80% cutoff.
TRAIN_FRACTION_BAND = (0.78, 0.82)


@dataclass(frozen=True)
class CheckIn:
    user_id: str
    poi_id: str
    lat: float
    lon: float
    timestamp: float
    category: Optional[str] = None

    def __post_init__(self):
        if not self.user_id or not self.poi_id:
            raise CheckinFormatError("user_id and poi_id must be non-empty")
        if not -90.0 <= self.lat <= 90.0:
            raise CheckinFormatError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise CheckinFormatError(f"longitude out of range: {self.lon}")
        if not (np.isfinite(self.timestamp) and self.timestamp > 0):
            raise CheckinFormatError(f"timestamp must be finite and positive: {self.timestamp}")


class CheckinList(list):
    """A list of :class:`CheckIn` that remembers how many input lines were rejected."""

    def __init__(self, records: Iterable[CheckIn] = (), rejected: int = 0):
        super().__init__(records)
        self.rejected = rejected


class CheckinFormat(BaseModel):
    """
    Column mapping for a delimited check-in file.

    Columns are either 0-based positions or header names. ``header=None`` means
    the first line is a header iff its latitude field is not numeric.
    """

    model_config = ConfigDict(frozen=True)

    columns: Dict[str, Union[int, str, None]] = {
        "user_id": 0,
        "poi_id": 1,
        "lat": 2,
        "lon": 3,
        "timestamp": 4,
        "category": 5,
    }
    header: Optional[bool] = None
    delimiter: str = ","

    @field_validator("columns")
    @classmethod
    def _require_fields(cls, columns):
        missing = [name for name in REQUIRED_FIELDS if columns.get(name) is None]
        if missing:
            raise ValueError(f"no column mapped for {', '.join(missing)}")
        unknown = set(columns) - set(CHECKIN_FIELDS)
        if unknown:
            raise ValueError(f"unknown check-in fields {sorted(unknown)}")
        return columns


def parse_column_mapping(value: Union[str, Dict[str, Union[int, str]]]) -> Dict[str, Union[int, str]]:
    """``"user_id=0,poi_id=venue"`` or a mapping; digit-only columns are positions."""
    if isinstance(value, dict):
        items = value.items()
    else:
        items = []
        for part in filter(None, (p.strip() for p in str(value).split(","))):
            name, sep, column = part.partition("=")
            if not sep or not name.strip() or not column.strip():
                raise ValueError(f"expected field=column, got '{part}'")
            items.append((name.strip(), column.strip()))
    return {
        name: int(column) if isinstance(column, int) or str(column).isdigit() else str(column)
        for name, column in items
    }


class TimeSlotSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    slot_hours: int = 8

    @field_validator("slot_hours")
    @classmethod
    def _divides_day(cls, value: int) -> int:
        if value < 1 or 24 % value != 0:
            raise ValueError(f"slot_hours must divide 24 exactly, got {value}")
        return value

    @property
    def slots_per_day(self) -> int:
        return 24 // self.slot_hours


class DataConfig(ConfigSection):
    section = "data"

    slot_hours: int = 8
    region_k: int = 200
    region_label_file: Optional[str] = None
    train_fraction: float = 0.8
    tz_offset: float = 0.0
    kmeans_seed: int = 0
    kmeans_max_iters: int = 100
    use_category: bool = False
    delimiter: str = ","
    header: Literal["auto", "yes", "no"] = "auto"
    columns: Optional[Dict[str, Union[int, str]]] = None

    @field_validator("slot_hours")
    @classmethod
    def _slot_hours(cls, value: int) -> int:
        return TimeSlotSpec(slot_hours=value).slot_hours

    @field_validator("columns", mode="before")
    @classmethod
    def _columns(cls, value):
        if value is None:
            return None
        columns = parse_column_mapping(value)
        CheckinFormat(columns=columns)
        return columns

    @field_validator("region_k", "kmeans_max_iters")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("train_fraction")
    @classmethod
    def _fraction(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        return value

    @property
    def slots(self) -> TimeSlotSpec:
        return TimeSlotSpec(slot_hours=self.slot_hours)

    @property
    def checkin_format(self) -> CheckinFormat:
        header = {"auto": None, "yes": True, "no": False}[self.header]
        if self.columns is None:
            return CheckinFormat(header=header, delimiter=self.delimiter)
        return CheckinFormat(columns=self.columns, header=header, delimiter=self.delimiter)

    @classmethod
    def add_args(cls, parser: argparse.ArgumentParser, prefix: Optional[str] = None):
        prefix_str = "" if prefix is None else prefix + "."
        try:
            parser.add_argument(
                "--" + prefix_str + "data.slot_hours",
                type=int,
                default=8,
                help="Length of a time slot in hours; must divide 24.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.region_k",
                type=int,
                default=200,
                help="Number of k-means regions.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.region_label_file",
                type=str,
                default=None,
                help="CSV of (poi_id, lat, lon, region) labels. Replaces k-means when set.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.train_fraction",
                type=float,
                default=0.8,
                help="Quantile of timestamps used as the train/test cutoff.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.tz_offset",
                type=float,
                default=0.0,
                help="Dataset timezone offset from UTC in hours.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.kmeans_seed",
                type=int,
                default=0,
                help="Seed for k-means++ initialization.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.kmeans_max_iters",
                type=int,
                default=100,
                help="Maximum Lloyd iterations.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.use_category",
                action="store_true",
                default=False,
                help="Compose the category into relation paths.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.delimiter",
                type=str,
                default=",",
                help="Field delimiter of check-in files.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.header",
                choices=["auto", "yes", "no"],
                default="auto",
                help="Whether check-in files start with a header line.",
            )
            parser.add_argument(
                "--" + prefix_str + "data.columns",
                type=str,
                default=None,
                help="Column mapping of check-in files, e.g. 'user_id=0,timestamp=1,lat=2,lon=3,poi_id=4'.",
            )
        except argparse.ArgumentError:
            # re-parsing arguments.
            pass


def _resolve_columns(first_row: Sequence[str], fmt: CheckinFormat) -> Tuple[Dict[str, Optional[int]], bool]:
    """Maps every check-in field to a column position and decides whether ``first_row`` is a header."""
    n_cols = len(first_row)
    named = any(isinstance(col, str) for col in fmt.columns.values())
    has_header = fmt.header
    if has_header is None:
        lat_col = fmt.columns["lat"]
        if named or not isinstance(lat_col, int) or lat_col >= n_cols:
            has_header = named
        else:
            has_header = bool(np.isnan(pd.to_numeric(first_row[lat_col], errors="coerce")))
    if named and not has_header:
        raise CheckinFormatError("Named columns need a header line")

    names = [str(name).strip() for name in first_row] if has_header else []
    positions: Dict[str, Optional[int]] = {}
    for name in CHECKIN_FIELDS:
        col = fmt.columns.get(name)
        if col is None:
            positions[name] = None
        elif isinstance(col, str):
            if col not in names:
                if name == "category":
                    positions[name] = None
                    continue
                raise CheckinFormatError(f"Column '{col}' for {name} not found in header {names}")
            positions[name] = names.index(col)
        elif col < n_cols:
            positions[name] = col
        elif name == "category":
            positions[name] = None
        else:
            raise CheckinFormatError(f"Column {col} for {name} is beyond the {n_cols} columns of the file")
    return positions, has_header


def _parse_timestamps(values: pd.Series) -> pd.Series:
    """Epoch seconds, or ISO-8601 / ``YYYY-MM-DD HH:MM:SS`` strings read as UTC."""
    seconds = pd.to_numeric(values, errors="coerce")
    textual = seconds.isna() & values.str.strip().ne("")
    if textual.any():
        parsed = pd.to_datetime(values[textual], utc=True, errors="coerce", format="mixed")
        epoch = pd.Timestamp(0, tz="UTC")
        seconds.loc[textual] = (parsed - epoch) / pd.Timedelta(seconds=1)
    return seconds.astype(float)


def parse_timestamp(value) -> float:
    """
    Raises:
        CheckinFormatError: if ``value`` is neither epoch seconds nor a date string.
    """
    seconds = _parse_timestamps(pd.Series([str(value)]))[0]
    if not np.isfinite(seconds):
        raise CheckinFormatError(f"Unparseable timestamp '{value}'")
    return float(seconds)


def parse_checkins(path: str, format_spec: Optional[CheckinFormat] = None) -> CheckinList:
    """
    Reads a delimited check-in file into :class:`CheckIn` records in file order.

    Lines with missing keys, out-of-range coordinates, unparseable or
    non-finite or non-positive timestamps, or too many fields are skipped and counted in
    ``rejected``.

    Raises:
        CheckinFormatError: if the file is missing, its columns cannot be
            mapped, or no line holds a valid record.
    """
    fmt = format_spec or CheckinFormat()
    path = os.path.expanduser(path)
    if not os.path.isfile(path):
        raise CheckinFormatError(f"Check-in file not found: {path}")

    bad_lines: List[List[str]] = []
    try:
        frame = pd.read_csv(
            path,
            sep=fmt.delimiter,
            header=None,
            dtype=str,
            engine="python",
            keep_default_na=False,
            skip_blank_lines=True,
            on_bad_lines=lambda line: bad_lines.append(line),
        )
    except pd.errors.EmptyDataError as e:
        raise CheckinFormatError(f"Check-in file is empty: {path}") from e
    frame = frame.fillna("")
    if frame.empty:
        raise CheckinFormatError(f"Check-in file is empty: {path}")

    positions, has_header = _resolve_columns(list(frame.iloc[0]), fmt)
    rows = frame.iloc[1:] if has_header else frame

    users = rows[positions["user_id"]].str.strip()
    pois = rows[positions["poi_id"]].str.strip()
    lats = pd.to_numeric(rows[positions["lat"]], errors="coerce")
    lons = pd.to_numeric(rows[positions["lon"]], errors="coerce")
    stamps = _parse_timestamps(rows[positions["timestamp"]])
    if positions["category"] is not None:
        categories = rows[positions["category"]].str.strip()
    else:
        categories = pd.Series("", index=rows.index)

    valid = (
            users.ne("")
            & pois.ne("")
            & lats.between(-90.0, 90.0)
            & lons.between(-180.0, 180.0)
            & np.isfinite(stamps)
            & stamps.gt(0)
    )
    rejected = len(bad_lines) + int((~valid).sum())

    records = CheckinList(
        (
            CheckIn(u, p, float(la), float(lo), float(ts), c or None)
            for u, p, la, lo, ts, c in zip(
                users[valid], pois[valid], lats[valid], lons[valid], stamps[valid], categories[valid]
            )
        ),
        rejected=rejected,
    )
    if not records:
        raise CheckinFormatError(f"No valid check-in in {path} ({rejected} lines rejected)")
    if rejected:
        poikg.logging.warning(f"Rejected {rejected} malformed check-in lines", prefix=os.path.basename(path))
    poikg.logging.info(f"Parsed {len(records)} check-ins", prefix=os.path.basename(path))
    return records


def checkins_to_frame(records: Sequence[CheckIn]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "user_id": [r.user_id for r in records],
            "poi_id": [r.poi_id for r in records],
            "lat": np.array([r.lat for r in records], dtype=float),
            "lon": np.array([r.lon for r in records], dtype=float),
            "timestamp": np.array([r.timestamp for r in records], dtype=float),
            "category": [r.category or "" for r in records],
        },
        columns=list(CHECKIN_FIELDS),
    )


def write_checkins(records: Sequence[CheckIn], path: str):
    """Writes records with a header line; floats are written at full precision."""
    checkins_to_frame(records).to_csv(path, index=False, float_format="%.17g")


def assign_time_slot(timestamp: float, spec: TimeSlotSpec, tz_offset: float = 0.0) -> int:
    """
    Slot index of the local hour of day, ``floor(hour / slot_hours)``.

    Raises:
        CheckinFormatError: if ``timestamp`` is not finite.
    """
    if not math.isfinite(timestamp):
        raise CheckinFormatError(f"Timestamp must be finite: {timestamp}")
    local = (timestamp + tz_offset * SECONDS_PER_HOUR) % SECONDS_PER_DAY
    slot = int(local // (spec.slot_hours * SECONDS_PER_HOUR))
    return min(slot, spec.slots_per_day - 1)


def assign_time_slots(timestamps, spec: TimeSlotSpec, tz_offset: float = 0.0) -> np.ndarray:
    local = np.mod(np.asarray(timestamps, dtype=float) + tz_offset * SECONDS_PER_HOUR, SECONDS_PER_DAY)
    slots = np.floor_divide(local, spec.slot_hours * SECONDS_PER_HOUR).astype(np.int64)
    return np.minimum(slots, spec.slots_per_day - 1)


def _coord_key(lat: float, lon: float) -> Tuple[float, float]:
    return round(float(lat), 6), round(float(lon), 6)


@dataclass
class RegionModel:
    """
    Maps coordinates to region ids, either by nearest k-means centroid or by a
    precomputed label table.
    """

    mode: Literal["kmeans", "precomputed"]
    region_count: int
    centroids: Optional[np.ndarray] = None
    inertia: Optional[float] = None
    region_names: List[str] = field(default_factory=list)
    poi_labels: Dict[str, int] = field(default_factory=dict)
    coord_labels: Dict[Tuple[float, float], int] = field(default_factory=dict)

    def assign(self, lat: float, lon: float, poi_id: Optional[str] = None) -> int:
        if self.mode == "kmeans":
            dist = np.sum((self.centroids - np.array([lat, lon], dtype=float)) ** 2, axis=1)
            # argmin keeps the first minimum, the lowest id.
            return int(np.argmin(dist))
        if poi_id is not None and poi_id in self.poi_labels:
            return self.poi_labels[poi_id]
        key = _coord_key(lat, lon)
        if key in self.coord_labels:
            return self.coord_labels[key]
        raise RegionError(f"No region label for point {key} (poi {poi_id})")

    def assign_many(self, lats, lons, poi_ids: Optional[Sequence[str]] = None) -> np.ndarray:
        lats = np.asarray(lats, dtype=float)
        lons = np.asarray(lons, dtype=float)
        if self.mode == "kmeans":
            points = np.column_stack([lats, lons])
            dist = ((points[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
            return np.argmin(dist, axis=1).astype(np.int64)
        ids = poi_ids if poi_ids is not None else [None] * len(lats)
        return np.array([self.assign(la, lo, p) for la, lo, p in zip(lats, lons, ids)], dtype=np.int64)

    def to_dict(self) -> dict:
        state = {"mode": self.mode, "region_count": self.region_count}
        if self.mode == "kmeans":
            state["centroids"] = self.centroids.tolist()
            state["inertia"] = self.inertia
        else:
            state["region_names"] = self.region_names
            state["poi_labels"] = self.poi_labels
            state["coord_labels"] = [[lat, lon, region] for (lat, lon), region in self.coord_labels.items()]
        return state

    @classmethod
    def from_dict(cls, state: dict) -> "RegionModel":
        if state["mode"] == "kmeans":
            return cls(
                mode="kmeans",
                region_count=int(state["region_count"]),
                centroids=np.asarray(state["centroids"], dtype=float).reshape(-1, 2),
                inertia=state.get("inertia"),
            )
        return cls(
            mode="precomputed",
            region_count=int(state["region_count"]),
            region_names=list(state.get("region_names", [])),
            poi_labels={k: int(v) for k, v in state.get("poi_labels", {}).items()},
            coord_labels={(float(lat), float(lon)): int(r) for lat, lon, r in state.get("coord_labels", [])},
        )

    def save(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path: str) -> "RegionModel":
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


def cluster_regions(points, k: int, seed: int = 0, max_iters: int = 100) -> RegionModel:
    """
    Lloyd's k-means with k-means++ seeding on raw (lat, lon) degrees.

    Iterates until no assignment changes or ``max_iters`` is reached.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if k < 1:
        raise RegionError(f"Region count must be >= 1, got {k}")
    n_distinct = len(np.unique(points, axis=0))
    if n_distinct < k:
        raise RegionError(f"Cannot form {k} regions from {n_distinct} distinct points")

    kmeans = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=1,
        max_iter=max_iters,
        tol=0.0,
        algorithm="lloyd",
        random_state=seed,
    ).fit(points)
    centroids = np.asarray(kmeans.cluster_centers_, dtype=float)
    if len(np.unique(centroids, axis=0)) < k:
        raise RegionError(f"k-means produced coincident centroids for k={k}")
    poikg.logging.debug(f"k-means: {k} regions, {kmeans.n_iter_} iterations, inertia {kmeans.inertia_:.6g}")
    return RegionModel(mode="kmeans", region_count=k, centroids=centroids, inertia=float(kmeans.inertia_))


def load_region_labels(path: str) -> RegionModel:
    """Reads a ``poi_id, lat, lon, region`` label table; region names are interned in sorted order."""
    path = os.path.expanduser(path)
    if not os.path.isfile(path):
        raise RegionError(f"Region label file not found: {path}")
    table = pd.read_csv(path, dtype={"poi_id": str, "region": str})
    missing = {"poi_id", "lat", "lon", "region"} - set(table.columns)
    if missing:
        raise RegionError(f"Region label file lacks columns {sorted(missing)}")
    names = sorted(table["region"].astype(str).unique())
    index = {name: i for i, name in enumerate(names)}
    poi_labels = {}
    coord_labels = {}
    for poi_id, lat, lon, region in table[["poi_id", "lat", "lon", "region"]].itertuples(index=False):
        poi_labels[str(poi_id)] = index[str(region)]
        coord_labels[_coord_key(lat, lon)] = index[str(region)]
    return RegionModel(
        mode="precomputed",
        region_count=len(names),
        region_names=names,
        poi_labels=poi_labels,
        coord_labels=coord_labels,
    )


def assign_region(point: Tuple[float, float], model: RegionModel, poi_id: Optional[str] = None) -> int:
    return model.assign(point[0], point[1], poi_id)


def assign_regions(records: Sequence[CheckIn], model: RegionModel) -> np.ndarray:
    return model.assign_many(
        [r.lat for r in records], [r.lon for r in records], [r.poi_id for r in records]
    )


def fit_regions(records: Sequence[CheckIn], cfg: DataConfig) -> RegionModel:
    """Region model for a training log: the label table when configured, k-means otherwise."""
    if cfg.region_label_file:
        return load_region_labels(cfg.region_label_file)
    points = np.array([[r.lat, r.lon] for r in records], dtype=float)
    return cluster_regions(points, cfg.region_k, seed=cfg.kmeans_seed, max_iters=cfg.kmeans_max_iters)


@dataclass
class SplitDataset:
    train: List[CheckIn]
    test: List[CheckIn]
    cutoff_timestamp: float

    @property
    def train_fraction(self) -> float:
        return len(self.train) / (len(self.train) + len(self.test))


def split_by_date(records: Sequence[CheckIn], train_fraction: float = 0.8) -> SplitDataset:
    """
    Global temporal split at the nearest-rank ``train_fraction`` quantile.

    The cutoff is the first distinct timestamp above the quantile, so every
    record at the quantile itself trains; when the quantile is the latest
    timestamp the cutoff is the quantile. Input order is kept on both sides.
    """
    if not records:
        raise SplitError("Cannot split an empty check-in log")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")

    stamps = np.array([r.timestamp for r in records], dtype=float)
    distinct = np.unique(stamps)
    if len(distinct) < 2:
        raise SplitError("All check-ins share one timestamp; no date cutoff separates them")

    ordered = np.sort(stamps)
    rank = max(1, math.ceil(train_fraction * len(ordered)))
    quantile = ordered[rank - 1]
    later = distinct[distinct > quantile]
    cutoff = float(later[0]) if later.size else float(quantile)

    train = [r for r, ts in zip(records, stamps) if ts < cutoff]
    test = [r for r, ts in zip(records, stamps) if ts >= cutoff]
    split = SplitDataset(train=train, test=test, cutoff_timestamp=cutoff)

    poikg.logging.info(
        f"Split {len(records)} check-ins at {cutoff:.0f}: {len(train)} train, {len(test)} test "
        f"({split.train_fraction:.3f})"
    )
    low, high = TRAIN_FRACTION_BAND
    if train_fraction == 0.8 and not low <= split.train_fraction <= high:
        poikg.logging.warning(
            f"Train share {split.train_fraction:.3f} is outside [{low}, {high}]; timestamps are heavily tied"
        )
    return split


@dataclass
class HomeLocation:
    user_id: str
    mu: np.ndarray
    sigma: np.ndarray

    @property
    def spread(self) -> float:
        """Isotropic spread ``sqrt(trace(sigma))`` in degrees."""
        return float(np.sqrt(max(float(np.trace(self.sigma)), 0.0)))


def _home_from_coords(user_id: str, coords: np.ndarray) -> HomeLocation:
    mu = coords.mean(axis=0)
    if len(coords) < 2:
        sigma = np.zeros((2, 2))
    else:
        sigma = np.cov(coords, rowvar=False, ddof=1)
        sigma = (sigma + sigma.T) / 2.0
    return HomeLocation(user_id=user_id, mu=mu, sigma=sigma)


def fit_home_location(user_train: Sequence[CheckIn]) -> HomeLocation:
    """Gaussian over one user's training coordinates: sample mean and unbiased covariance."""
    if not user_train:
        raise MissingCoordinatesError("Cannot fit a home location from an empty history")
    users = {r.user_id for r in user_train}
    if len(users) != 1:
        raise DataError(f"Home location history mixes {len(users)} users")
    coords = np.array([[r.lat, r.lon] for r in user_train], dtype=float)
    return _home_from_coords(user_train[0].user_id, coords)


def fit_home_locations(train: Sequence[CheckIn]) -> Dict[str, HomeLocation]:
    frame = checkins_to_frame(train)
    return {
        user_id: _home_from_coords(user_id, group[["lat", "lon"]].to_numpy(dtype=float))
        for user_id, group in frame.groupby("user_id", sort=True)
    }


def poi_coordinates(records: Sequence[CheckIn]) -> Dict[str, np.ndarray]:
    """Mean observed coordinates per POI."""
    frame = checkins_to_frame(records)
    means = frame.groupby("poi_id", sort=True)[["lat", "lon"]].mean()
    return {poi_id: row.to_numpy(dtype=float) for poi_id, row in means.iterrows()}


@dataclass
class FrequencyMatrix:
    row_index: List[str]
    col_index: List[str]
    counts: sp.csr_matrix

    def __post_init__(self):
        self._rows = {key: i for i, key in enumerate(self.row_index)}
        self._cols = {key: j for j, key in enumerate(self.col_index)}

    @property
    def shape(self) -> Tuple[int, int]:
        return self.counts.shape

    def row_of(self, key: str) -> int:
        return self._rows[key]

    def col_of(self, key: str) -> int:
        return self._cols[key]

    def count(self, user_id: str, poi_id: str) -> int:
        i, j = self._rows.get(user_id), self._cols.get(poi_id)
        if i is None or j is None:
            return 0
        return int(self.counts[i, j])

    def toarray(self) -> np.ndarray:
        return self.counts.toarray()


def build_frequency_matrix(train: Sequence[CheckIn], rows: Sequence[str], cols: Sequence[str]) -> FrequencyMatrix:
    """Counts train check-ins per (user, POI); records outside ``rows``/``cols`` are ignored."""
    if len(rows) == 0 or len(cols) == 0:
        raise DataError("Frequency matrix needs non-empty row and column index sets")
    row_of = {key: i for i, key in enumerate(rows)}
    col_of = {key: j for j, key in enumerate(cols)}
    ii, jj = [], []
    for record in train:
        i = row_of.get(record.user_id)
        j = col_of.get(record.poi_id)
        if i is not None and j is not None:
            ii.append(i)
            jj.append(j)
    # duplicates are summed on conversion
    counts = sp.coo_matrix(
        (np.ones(len(ii), dtype=np.int64), (np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64))),
        shape=(len(rows), len(cols)),
    ).tocsr()
    return FrequencyMatrix(row_index=list(rows), col_index=list(cols), counts=counts)
