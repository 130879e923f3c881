"""
Error hierarchy.
- ConfigError  -> CLI exit code 2
- DataError    -> CLI exit code 3
"""


class VolumeTrackError(Exception):
    exit_code = 1


class ConfigError(VolumeTrackError):
    exit_code = 2


class DataError(VolumeTrackError):
    exit_code = 3


class FrameFormatError(DataError):
    pass


class ModelFormatError(DataError):
    pass


class SceneScriptError(DataError):
    pass


class GroundTruthError(DataError):
    pass


class MissingFramesError(DataError):
    def __init__(self, gaps: list[int]):
        self.gaps = gaps
        super().__init__(f"Missing frames: {gaps}")


class ShapeMismatchError(VolumeTrackError, ValueError):
    pass


class DescriptorKindError(VolumeTrackError, ValueError):
    pass


class ProblemSizeError(VolumeTrackError, ValueError):
    pass


class EdgeNotFoundError(VolumeTrackError, KeyError):
    pass


class EmptyVolumeError(VolumeTrackError, ValueError):
    pass
