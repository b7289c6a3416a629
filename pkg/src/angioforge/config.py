"""Session and backend configuration."""

from dataclasses import asdict, dataclass, field

DEFAULT_CREDENTIAL_ENV = "ANGIOFORGE_API_KEY"

LOCAL = "local"
REMOTE = "remote"
MOCK = "mock"


@dataclass
class BackendConfig:
    kind: str = LOCAL
    endpoint_url: str | None = None
    credential_source: str = DEFAULT_CREDENTIAL_ENV
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 250.0  # milliseconds
    max_concurrent: int = 4

    def __post_init__(self):
        if self.kind not in (LOCAL, REMOTE, MOCK):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == REMOTE:
            if not self.endpoint_url:
                raise ValueError("remote backend requires endpoint_url")
            if not self.credential_source:
                raise ValueError("remote backend requires credential_source")
        if not 1 <= self.timeout <= 300:
            raise ValueError("timeout must be in [1, 300] seconds")
        if not 0 <= self.max_retries <= 10:
            raise ValueError("max_retries must be in [0, 10]")


@dataclass
class SessionConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    pixel_pitch: float = 0.25     # mm per pixel
    n_sides: int = 16
    min_area: int = 64            # artifact-removal floor, pixels
    clahe_tile: int = 64
    clahe_clip: float = 0.01
    smooth_radius: int = 2
    close_radius: int = 3
    spur_min: float = 5.0
    inlets: list | None = None    # endpoint node overrides
    outlets: list | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        d = dict(d)
        backend = d.pop("backend", {})
        return cls(backend=BackendConfig(**backend), **d)
