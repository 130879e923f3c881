from volumetrack.models.volume import GridSpec, OccupancyVolume, PointFrame

__all__ = ["GridSpec", "OccupancyVolume", "PointFrame"]
