"""Exception types shared across the pipeline modules."""


class AngioforgeError(Exception):
    """Base class for all pipeline errors."""


# --- artifacts / raster I/O ---

class UndecodableImage(AngioforgeError):
    pass


class ImageTooSmall(AngioforgeError):
    pass


class ImageTooLarge(AngioforgeError):
    pass


# --- session lifecycle ---

class SessionComplete(AngioforgeError):
    pass


class NoPriorAttempt(AngioforgeError):
    pass


class EmptyPrompt(AngioforgeError):
    pass


class RecordNotFound(AngioforgeError):
    pass


class AlreadyDecided(AngioforgeError):
    pass


class NonDeterministicBackend(AngioforgeError):
    pass


class MissingArtifact(AngioforgeError):
    pass


class ManifestCorrupt(AngioforgeError):
    pass


# --- backends ---

class BackendFailure(AngioforgeError):
    pass


class BackendUnavailable(BackendFailure):
    def __init__(self, msg, attempts=None):
        super().__init__(msg)
        self.attempts = attempts


class MalformedResponse(BackendFailure):
    pass


# --- image ops ---

class TileTooSmall(AngioforgeError):
    pass


class UniformImage(AngioforgeError):
    pass


class AreaDistortion(AngioforgeError):
    pass


# --- flow viz ---

class EmptyMask(AngioforgeError):
    pass


class DegenerateSkeleton(AngioforgeError):
    pass


class UnreachableOutlet(AngioforgeError):
    pass


class NoInlet(AngioforgeError):
    pass


class DimensionMismatch(AngioforgeError):
    pass


# --- meshing ---

class DegenerateCenterline(AngioforgeError):
    pass


class SelfIntersectingInput(AngioforgeError):
    pass


class EmptyMesh(AngioforgeError):
    pass


class MalformedStl(AngioforgeError):
    pass


class MeshValidationFailure(AngioforgeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report
