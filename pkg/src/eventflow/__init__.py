"""Event-driven movement flows from georeferenced social media records.

Infers where event attendees live from their posting histories, using
variable-bandwidth kernel density surfaces that widen with the size of the
referenced place, then turns those homes into population-calibrated flow
tables per destination region.
"""

from .errors import (
    ConfigError,
    DataError,
    EmptyFlowTableError,
    EventFlowError,
    InvalidArgumentError,
    InvalidGeometryError,
    NoVarianceError,
    ResourceLimitError,
    StoreReadError,
)
from .geomodel import (
    Coordinate,
    GeoRecord,
    Place,
    PlaceScale,
    PlanarPoint,
    Projection,
    Region,
    load_regions,
    point_in_region,
    polygon_area,
    polygon_centroid,
    project_forward,
    project_inverse,
    write_regions,
)
from .ingest import FilterSpec, RecordStore, fetch_history, filter_event_records, select_event_users
from .vbkde import ActivitySurface, GridSpec, base_bandwidth, bandwidth_scale, build_surface
from .inference import HomeEstimate, infer_home, match_profile_location
from .stats import count_by_zone, contiguity, gi_star, temporal_histogram
from .flows import FlowTable, build_flow_table, compare_flows
from .config import PipelineConfig
from .pipeline import Pipeline

__version__ = "0.1.0"

__all__ = [
    "ActivitySurface", "ConfigError", "Coordinate", "DataError", "EmptyFlowTableError",
    "EventFlowError", "FilterSpec", "FlowTable", "GeoRecord", "GridSpec", "HomeEstimate",
    "InvalidArgumentError", "InvalidGeometryError", "NoVarianceError", "Pipeline",
    "PipelineConfig", "Place", "PlaceScale", "PlanarPoint", "Projection", "RecordStore",
    "Region", "ResourceLimitError", "StoreReadError", "bandwidth_scale", "base_bandwidth",
    "build_flow_table", "build_surface", "compare_flows", "contiguity", "count_by_zone",
    "fetch_history", "filter_event_records", "gi_star", "infer_home", "load_regions",
    "match_profile_location", "point_in_region", "polygon_area", "polygon_centroid",
    "project_forward", "project_inverse", "select_event_users", "temporal_histogram",
    "write_regions",
]
