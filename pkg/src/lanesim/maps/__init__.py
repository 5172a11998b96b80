from .drivable import cell_of, drivable_area, reachable_segments
from .graph import LaneGraph, LaneSegment, MapError, TrafficControl, lane_associate
from .io import load_map, map_from_dict, map_to_dict, save_map
from .procedural import ROI, TEMPLATES, entry_segments, procedural_map
from .raster import CHANNELS, DRIVABLE_RESOLUTION, POLICY_RESOLUTION, MapRaster, rasterize

__all__ = [
    "CHANNELS",
    "DRIVABLE_RESOLUTION",
    "LaneGraph",
    "LaneSegment",
    "MapError",
    "MapRaster",
    "POLICY_RESOLUTION",
    "ROI",
    "TEMPLATES",
    "TrafficControl",
    "cell_of",
    "drivable_area",
    "entry_segments",
    "lane_associate",
    "load_map",
    "map_from_dict",
    "map_to_dict",
    "procedural_map",
    "rasterize",
    "reachable_segments",
    "save_map",
]
