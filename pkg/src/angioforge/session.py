"""Session lifecycle, append-only processing history, and replay.

A session is one angiogram's journey through the 16-step pipeline. Records
are never mutated or removed; a superseded attempt is expressed by a new
record with a higher iteration. Manifests are JSON written atomically
(temp file + rename); artifacts are content-addressed PNG files in the
session directory.
"""

import json
import os
import tempfile
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import raster
from .backends import EditRequest, make_backend
from .config import REMOTE, SessionConfig
from .errors import (AlreadyDecided, EmptyPrompt, ManifestCorrupt,
                     MissingArtifact, NoPriorAttempt, NonDeterministicBackend,
                     RecordNotFound, SessionComplete)
from .pipelinedef import PIPELINE, PipelineDefinition

IN_PROGRESS = "InProgress"
COMPLETE = "Complete"
ABORTED = "Aborted"

PENDING = "Pending"
ACCEPTED = "Accepted"
REJECTED = "Rejected"


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class StepRecord:
    step_index: int
    iteration: int
    prompt_used: str
    backend_id: str
    input_hash: str
    output_hash: str
    started_at: str
    finished_at: str
    state: str = PENDING

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "StepRecord":
        return cls(**d)


@dataclass
class ArtifactMeta:
    hash: str
    width: int
    height: int
    kind: str


@dataclass
class Session:
    id: str
    created_at: str
    source_hash: str
    config: SessionConfig
    pipeline: PipelineDefinition
    records: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)  # hash -> ArtifactMeta
    status: str = IN_PROGRESS

    @property
    def cursor(self) -> int:
        accepted = [r.step_index for r in self.records if r.state == ACCEPTED]
        return 1 + max(accepted, default=0)

    def accepted_record(self, step_index: int):
        for r in self.records:
            if r.step_index == step_index and r.state == ACCEPTED:
                return r
        return None

    def records_for(self, step_index: int):
        return [r for r in self.records if r.step_index == step_index]

    def find_record(self, step_index: int, iteration: int):
        for r in self.records:
            if r.step_index == step_index and r.iteration == iteration:
                return r
        raise RecordNotFound(
            f"no record for step {step_index} iteration {iteration}")

    def to_manifest(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.created_at,
            "pipeline_version": self.pipeline.version,
            "source_hash": self.source_hash,
            "config": self.config.to_dict(),
            "status": self.status,
            "records": [r.to_dict() for r in self.records],
            "artifacts": {h: a.__dict__ for h, a in self.artifacts.items()},
        }

    @classmethod
    def from_manifest(cls, doc: dict) -> "Session":
        try:
            if doc["pipeline_version"] != PIPELINE.version:
                raise ManifestCorrupt(
                    f"unknown pipeline version {doc['pipeline_version']!r}")
            return cls(
                id=doc["id"],
                created_at=doc["created_at"],
                source_hash=doc["source_hash"],
                config=SessionConfig.from_dict(doc["config"]),
                pipeline=PIPELINE,
                records=[StepRecord.from_dict(r) for r in doc["records"]],
                artifacts={h: ArtifactMeta(**a)
                           for h, a in doc["artifacts"].items()},
                status=doc["status"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestCorrupt(f"bad manifest: {exc}") from exc


class SessionStore:
    """On-disk persistence: one directory per session."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def manifest_path(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "manifest.json"

    def artifact_path(self, session_id: str, content_hash: str) -> Path:
        return self.session_dir(session_id) / "artifacts" / f"{content_hash}.png"

    def outputs_dir(self, session_id: str) -> Path:
        return self.session_dir(session_id) / "outputs"

    def list_sessions(self):
        return sorted(p.name for p in self.root.iterdir()
                      if (p / "manifest.json").exists())

    def put_artifact(self, session: Session, data: bytes, kind: str) -> ArtifactMeta:
        h = raster.content_hash(data)
        arr = raster.decode_image(data)
        meta = ArtifactMeta(hash=h, width=arr.shape[1], height=arr.shape[0],
                            kind=kind)
        path = self.artifact_path(session.id, h)
        path.parent.mkdir(parents=True, exist_ok=True)
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        session.artifacts[h] = meta
        return meta

    def get_artifact(self, session_id: str, content_hash: str) -> bytes:
        path = self.artifact_path(session_id, content_hash)
        if not path.exists():
            raise MissingArtifact(f"artifact {content_hash} not on disk")
        return path.read_bytes()

    def save(self, session: Session) -> Path:
        path = self.manifest_path(session.id)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = json.dumps(session.to_manifest(), indent=2)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as f:
                f.write(doc)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return path

    def load(self, session_id: str) -> Session:
        path = self.manifest_path(session_id)
        if not path.exists():
            raise RecordNotFound(f"no session {session_id}")
        return self.load_manifest(path)

    def load_manifest(self, path, verify_artifacts: bool = True) -> Session:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestCorrupt(f"cannot read manifest: {exc}") from exc
        session = Session.from_manifest(doc)
        if verify_artifacts:
            for h in session.artifacts:
                if not self.artifact_path(session.id, h).exists():
                    raise ManifestCorrupt(f"artifact {h} referenced but missing")
        return session


def create_session(store: SessionStore, image: bytes,
                   config: SessionConfig | None = None) -> Session:
    config = config or SessionConfig()
    arr = raster.decode_image(image)
    raster.check_dimensions(arr)
    session = Session(
        id=uuid.uuid4().hex[:12],
        created_at=_utcnow(),
        source_hash=raster.content_hash(image),
        config=config,
        pipeline=PIPELINE,
    )
    store.put_artifact(session, image, raster.SOURCE_ANGIOGRAM)
    store.save(session)
    return session


def _input_hash_for(session: Session, step_index: int) -> str:
    spec = session.pipeline.step(step_index)
    source_step = spec.input_from if spec.input_from else step_index - 1
    if source_step == 0:
        return session.source_hash
    rec = session.accepted_record(source_step)
    if rec is None:
        raise RecordNotFound(f"step {source_step} has no accepted record")
    return rec.output_hash


def _run_step(store: SessionStore, session: Session, backend, prompt: str) -> StepRecord:
    step_index = session.cursor
    if step_index > 16:
        raise SessionComplete("all 16 steps are accepted")
    spec = session.pipeline.step(step_index)
    input_hash = _input_hash_for(session, step_index)
    image = store.get_artifact(session.id, input_hash)
    prior = session.records_for(step_index)
    iteration = 1 + max((r.iteration for r in prior), default=0)
    started = _utcnow()
    result = backend.edit_image(EditRequest(
        step=spec, prompt=prompt, image=image, session_id=session.id,
        attempt=iteration, params=session.config))
    meta = store.put_artifact(session, result.image, result.kind)
    record = StepRecord(
        step_index=step_index, iteration=iteration, prompt_used=prompt,
        backend_id=backend.id, input_hash=input_hash, output_hash=meta.hash,
        started_at=started, finished_at=_utcnow())
    session.records.append(record)
    store.save(session)
    return record


def advance_step(store: SessionStore, session: Session, backend) -> StepRecord:
    if session.status == COMPLETE or session.cursor > 16:
        raise SessionComplete("session already complete")
    prompt = session.pipeline.step(session.cursor).default_prompt
    return _run_step(store, session, backend, prompt)


def regenerate_step(store: SessionStore, session: Session, backend,
                    custom_prompt: str) -> StepRecord:
    if not custom_prompt:
        raise EmptyPrompt("custom prompt must be non-empty")
    if session.status == COMPLETE or session.cursor > 16:
        raise SessionComplete("session already complete")
    if not session.records_for(session.cursor):
        raise NoPriorAttempt(
            f"step {session.cursor} has no attempt to regenerate")
    return _run_step(store, session, backend, custom_prompt)


def accept_step(store: SessionStore, session: Session, step_index: int,
                iteration: int) -> Session:
    record = session.find_record(step_index, iteration)
    if record.state != PENDING:
        raise AlreadyDecided(
            f"step {step_index} iteration {iteration} is {record.state}")
    record.state = ACCEPTED
    for other in session.records_for(step_index):
        if other is not record and other.state == PENDING:
            other.state = REJECTED
    if all(session.accepted_record(i) for i in range(1, 17)):
        session.status = COMPLETE
    store.save(session)
    return session


def reject_step(store: SessionStore, session: Session, step_index: int,
                iteration: int) -> Session:
    record = session.find_record(step_index, iteration)
    if record.state != PENDING:
        raise AlreadyDecided(
            f"step {step_index} iteration {iteration} is {record.state}")
    record.state = REJECTED
    store.save(session)
    return session


def replay(store: SessionStore, manifest_path) -> list:
    """Re-execute all accepted steps from the source image and return the
    recomputed output hash per step."""
    session = store.load_manifest(manifest_path, verify_artifacts=False)
    if session.config.backend.kind == REMOTE:
        raise NonDeterministicBackend(
            "remote backend output is not reproducible; replay requires the "
            "local or mock backend")
    for r in session.records:
        if r.state == ACCEPTED and \
                not store.artifact_path(session.id, r.output_hash).exists():
            raise MissingArtifact(f"artifact {r.output_hash} deleted from store")
    backend = make_backend(session.config.backend)
    outputs = {0: store.get_artifact(session.id, session.source_hash)}
    hashes = []
    accepted = sorted((r for r in session.records if r.state == ACCEPTED),
                      key=lambda r: r.step_index)
    for rec in accepted:
        spec = session.pipeline.step(rec.step_index)
        source_step = spec.input_from if spec.input_from else rec.step_index - 1
        image = outputs[source_step]
        result = backend.edit_image(EditRequest(
            step=spec, prompt=rec.prompt_used, image=image,
            session_id=session.id, attempt=1, params=session.config))
        outputs[rec.step_index] = result.image
        hashes.append(raster.content_hash(result.image))
    return hashes
