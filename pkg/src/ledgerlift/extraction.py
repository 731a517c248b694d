"""Page-by-page extraction through a pluggable vision backend.

The driver walks the page manifest in order and hands each page image to a
backend together with the extraction prompt and a context block carrying the
tail of the previous page's rows, so tables that span page boundaries keep
their state. Responses use a plain-text wire format:

    ### ARCHETYPE: <name>     begins a table segment
    <CSV line> ...            rows in the shared 15-column layout
    ### END: <name>           closes the segment (absent when the table
                              continues onto the next page)
    NO_TABLES                 whole response, for pages without tables

Anything that does not fit the grammar is quarantined with its location,
never silently dropped. The fixture backend replays canned responses keyed
by digest, which makes full-document runs reproducible bit for bit.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import time
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from .core import ARCHETYPES, COLUMNS, LEVEL_SLICE, LedgerliftError, SchemaArchetype, split_fields
from .ingest import PageImage

log = logging.getLogger(__name__)

ENV_API_URL = "LEDGERLIFT_API_URL"
ENV_API_KEY = "LEDGERLIFT_API_KEY"

NO_TABLES = "NO_TABLES"
_SEGMENT_PREFIX = "### ARCHETYPE:"
_END_PREFIX = "### END"
_USAGE_PREFIX = "# usage:"

DEFAULT_CONTEXT_ROWS = 20
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = 0.5


class BackendError(LedgerliftError, RuntimeError):
    """A single backend call failed; the retry policy may still recover."""


class BackendFailure(LedgerliftError, RuntimeError):
    """The backend kept failing after the full retry policy."""


class FixtureMissing(BackendError):
    """No canned response exists for the requested digest."""


class IncompletePrompt(LedgerliftError, RuntimeError):
    """The generated extraction prompt omitted required vocabulary."""


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    thought_tokens: int = 0
    output_tokens: int = 0

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.input_tokens + other.input_tokens,
            self.thought_tokens + other.thought_tokens,
            self.output_tokens + other.output_tokens,
        )

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.input_tokens, self.thought_tokens, self.output_tokens)


def accumulate_usage(usages: list[TokenUsage]) -> TokenUsage:
    """Component-wise total; the only aggregation usage supports."""
    total = TokenUsage()
    for u in usages:
        total = total + u
    return total


@dataclass(frozen=True)
class RawLine:
    number: int  # 1-based line number within the response text
    text: str


@dataclass(frozen=True)
class Segment:
    archetype: str
    lines: tuple[RawLine, ...]


@dataclass(frozen=True)
class QuarantinedLine:
    number: int
    text: str
    reason: str


@dataclass(frozen=True)
class RawPageExtract:
    page: int
    segments: tuple[Segment, ...]
    usage: TokenUsage
    open_table: tuple[str, tuple[str, ...]] | None = None
    quarantined: tuple[QuarantinedLine, ...] = ()


@dataclass(frozen=True)
class ContextBlock:
    """State carried from one page's extraction into the next."""

    prev_page: int = 0
    tail_rows: tuple[str, ...] = ()
    open_table: tuple[str, tuple[str, ...]] | None = None

    def is_empty(self) -> bool:
        return self.prev_page == 0 and not self.tail_rows and self.open_table is None

    def to_json(self) -> str:
        payload = {
            "prev_page": self.prev_page,
            "tail_rows": list(self.tail_rows),
            "open_table": (
                [self.open_table[0], list(self.open_table[1])]
                if self.open_table
                else None
            ),
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ContextBlock":
        payload = json.loads(text)
        open_table = payload.get("open_table")
        return cls(
            prev_page=payload["prev_page"],
            tail_rows=tuple(payload["tail_rows"]),
            open_table=(open_table[0], tuple(open_table[1])) if open_table else None,
        )


class BackendAdapter:
    """Interface every extraction backend implements."""

    name = "abstract"

    def send(self, prompt: str, image: bytes | None = None) -> tuple[str, TokenUsage]:
        raise NotImplementedError


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class FixtureBackend(BackendAdapter):
    """Deterministic backend replaying canned responses from a directory.

    Lookup tries ``<image digest>__<prompt digest>.txt`` first, then the
    image-only ``<image digest>.txt``, so one image can carry distinct
    responses for distinct prompts (the meta-prompt flow needs that).
    A fixture file may begin with ``# usage: <input> <thought> <output>``;
    the header is stripped from the returned text.
    """

    name = "fixture"

    def __init__(self, fixtures_dir: Path | str):
        self.fixtures_dir = Path(fixtures_dir)

    def send(self, prompt: str, image: bytes | None = None) -> tuple[str, TokenUsage]:
        image_digest = _digest(image or b"")
        prompt_digest = _digest(prompt.encode("utf-8"))
        candidates = [
            self.fixtures_dir / f"{image_digest}__{prompt_digest}.txt",
            self.fixtures_dir / f"{image_digest}.txt",
        ]
        for path in candidates:
            if path.exists():
                return _split_usage_header(path.read_text(encoding="utf-8"))
        raise FixtureMissing(f"no fixture for image digest {image_digest}")


def _split_usage_header(text: str) -> tuple[str, TokenUsage]:
    first, sep, rest = text.partition("\n")
    if first.startswith(_USAGE_PREFIX):
        parts = first[len(_USAGE_PREFIX) :].split()
        usage = TokenUsage(int(parts[0]), int(parts[1]), int(parts[2]))
        return rest, usage
    return text, TokenUsage()


class HttpBackend(BackendAdapter):
    """Minimal live adapter: POSTs prompt plus one base64 page image.

    The endpoint and bearer key come from environment variables; the reply
    must be JSON with ``text`` and a ``usage`` object carrying input,
    thought and output token counts.
    """

    name = "live"

    def __init__(self, url: str | None = None, api_key: str | None = None, timeout: int = 120):
        self.url = url or os.environ.get(ENV_API_URL, "")
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.timeout = timeout
        if not self.url:
            raise BackendFailure(f"{ENV_API_URL} is not set")

    def send(self, prompt: str, image: bytes | None = None) -> tuple[str, TokenUsage]:
        body = {"prompt": prompt}
        if image is not None:
            body["image_b64"] = base64.b64encode(image).decode("ascii")
        request = urllib.request.Request(
            self.url,
            data=json.dumps(body).encode("utf-8"),
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except Exception as exc:  # URLError, timeout, bad JSON
            raise BackendError(str(exc)) from exc
        usage = payload.get("usage", {})
        return payload["text"], TokenUsage(
            int(usage.get("input", 0)),
            int(usage.get("thought", 0)),
            int(usage.get("output", 0)),
        )


def _send_with_retry(
    backend: BackendAdapter,
    prompt: str,
    image: bytes | None,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    sleep=time.sleep,
) -> tuple[str, TokenUsage]:
    last: BackendError | None = None
    for attempt in range(retries):
        try:
            return backend.send(prompt, image)
        except BackendError as exc:
            last = exc
            if attempt < retries - 1:
                delay = backoff * (2**attempt)
                log.warning("backend attempt %d failed (%s); retrying in %.1fs", attempt + 1, exc, delay)
                sleep(delay)
    raise BackendFailure(f"backend failed after {retries} attempts: {last}") from last


def parse_response(
    text: str, page: int, archetypes: dict[str, SchemaArchetype] = ARCHETYPES
) -> tuple[tuple[Segment, ...], tuple[str, tuple[str, ...]] | None, tuple[QuarantinedLine, ...]]:
    """Split a wire response into archetype segments.

    Returns (segments, open_table, quarantined). Every non-blank line that
    is not a recognized directive ends up either inside a segment or in the
    quarantine list, so nothing can vanish.
    """
    stripped = text.strip()
    if stripped == NO_TABLES:
        return (), None, ()

    segments: list[tuple[str, list[RawLine]]] = []
    quarantined: list[QuarantinedLine] = []
    current: tuple[str, list[RawLine]] | None = None
    skipping_unknown = False

    for number, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body:
            continue
        if body.startswith(_SEGMENT_PREFIX):
            name = body[len(_SEGMENT_PREFIX) :].strip()
            if name in archetypes:
                current = (name, [])
                segments.append(current)
                skipping_unknown = False
            else:
                quarantined.append(QuarantinedLine(number, line, f"unknown archetype {name!r}"))
                current = None
                skipping_unknown = True
            continue
        if body.startswith(_END_PREFIX):
            current = None
            skipping_unknown = False
            continue
        if body.startswith("#"):
            quarantined.append(QuarantinedLine(number, line, "unrecognized directive"))
            continue
        if current is not None:
            current[1].append(RawLine(number, line))
        else:
            reason = "line in quarantined segment" if skipping_unknown else "line outside any segment"
            quarantined.append(QuarantinedLine(number, line, reason))

    open_table: tuple[str, tuple[str, ...]] | None = None
    if current is not None:
        name, lines = current
        open_table = (name, _last_code_path(lines))

    packed = tuple(Segment(name, tuple(lines)) for name, lines in segments)
    return packed, open_table, tuple(quarantined)


def _last_code_path(lines: list[RawLine]) -> tuple[str, ...]:
    for raw in reversed(lines):
        try:
            cells = [c.strip() for c in split_fields(raw.text)]
        except Exception:
            continue
        if len(cells) < LEVEL_SLICE.stop:
            continue
        level_cells = cells[LEVEL_SLICE]
        filled = [i for i, c in enumerate(level_cells) if c]
        if filled:
            return tuple(level_cells[: filled[-1] + 1])
    return ()


def carry_context(prev: RawPageExtract, limit: int = DEFAULT_CONTEXT_ROWS) -> ContextBlock:
    """Build the next page's context from the previous page's extract."""
    if limit < 1:
        raise ValueError("context row limit must be >= 1")
    all_rows = [raw.text for segment in prev.segments for raw in segment.lines]
    return ContextBlock(
        prev_page=prev.page,
        tail_rows=tuple(all_rows[-limit:]),
        open_table=prev.open_table,
    )


def render_context(context: ContextBlock) -> str:
    if context.is_empty():
        return ""
    lines = [f"CONTEXT FROM PAGE {context.prev_page}:"]
    lines.extend(context.tail_rows)
    if context.open_table is not None:
        name, path = context.open_table
        shown = " > ".join(path) if path else "(start of table)"
        lines.append(f"OPEN TABLE: {name} at {shown}")
    return "\n".join(lines)


def extract_page(
    image: PageImage,
    context: ContextBlock,
    prompt: str,
    backend: BackendAdapter,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    sleep=time.sleep,
) -> RawPageExtract:
    """Extract one page: send, parse, record usage, quarantine the dregs."""
    if not prompt:
        raise ValueError("prompt must be non-empty")
    full_prompt = prompt
    context_text = render_context(context)
    if context_text:
        full_prompt = f"{prompt}\n\n{context_text}"
    image_bytes = Path(image.image_path).read_bytes()
    text, usage = _send_with_retry(
        backend, full_prompt, image_bytes, retries=retries, backoff=backoff, sleep=sleep
    )
    segments, open_table, quarantined = parse_response(text, image.page_number)
    for q in quarantined:
        log.warning("page %d line %d quarantined: %s", image.page_number, q.number, q.reason)
    return RawPageExtract(
        page=image.page_number,
        segments=segments,
        usage=usage,
        open_table=open_table,
        quarantined=quarantined,
    )


def extract_document(
    pages: list[PageImage],
    prompt: str,
    backend: BackendAdapter,
    context_rows: int = DEFAULT_CONTEXT_ROWS,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    sleep=time.sleep,
) -> list[RawPageExtract]:
    """Sequential whole-document extraction.

    Page k's context derives only from pages before k, so the loop cannot
    be parallelized within one document; a hard backend failure halts the
    run because every later page depends on the lost state.
    """
    extracts: list[RawPageExtract] = []
    context = ContextBlock()
    for page in pages:
        extract = extract_page(
            page, context, prompt, backend, retries=retries, backoff=backoff, sleep=sleep
        )
        extracts.append(extract)
        context = carry_context(extract, context_rows)
    return extracts


def _asset(name: str) -> str:
    return (Path(__file__).parent / "assets" / name).read_text(encoding="utf-8")


def static_prompt() -> str:
    """The hand-written extraction prompt shipped with the package."""
    return _asset("static_prompt.txt")


def document_structure_profile() -> str:
    """Editable knowledge text describing the fiscal head hierarchy."""
    return _asset("doc_structure.txt")


def render_meta_prompt(doc_profile: str, schemas: list[SchemaArchetype]) -> str:
    """The prompt that asks the backend to author the extraction prompt."""
    lines = [
        "You are preparing an extraction prompt for multi-page government",
        "fiscal tables. Using the document knowledge and the CSV schemas",
        "below, write the single prompt that will be sent for every page",
        "image. The prompt must name each table type and every CSV column,",
        "spell out the segment wire format (### ARCHETYPE / ### END /",
        "NO_TABLES) and instruct the model to continue open tables using",
        "the provided context block.",
        "",
        "DOCUMENT KNOWLEDGE:",
        doc_profile.strip(),
        "",
        "CSV SCHEMAS (shared column layout):",
        ",".join(COLUMNS),
        "",
        "TABLE TYPES:",
    ]
    for schema in schemas:
        lines.append(f"- {schema.name} (depth {schema.depth})")
    return "\n".join(lines)


def generate_extraction_prompt(
    doc_profile: str,
    schemas: list[SchemaArchetype],
    sample_pages: list[PageImage],
    backend: BackendAdapter,
    save_path: Path | str | None = None,
    retries: int = DEFAULT_RETRIES,
    backoff: float = DEFAULT_BACKOFF,
    sleep=time.sleep,
) -> str:
    """Let the backend author the extraction prompt, with a safe fallback.

    The candidate is accepted only if it mentions every archetype name and
    every column name; otherwise the static prompt ships instead and the
    incident is logged. The adapter takes a single image per call, so the
    meta request attaches the first sample page.
    """
    if len(schemas) != len(ARCHETYPES):
        raise ValueError("the full five-archetype set is required")
    if not sample_pages:
        raise ValueError("sample_pages must be non-empty")

    meta = render_meta_prompt(doc_profile, schemas)
    image_bytes = Path(sample_pages[0].image_path).read_bytes()
    candidate, usage = _send_with_retry(
        backend, meta, image_bytes, retries=retries, backoff=backoff, sleep=sleep
    )
    log.info("meta-prompt call used %s tokens", usage.as_tuple())

    missing = [s.name for s in schemas if s.name not in candidate]
    missing += [c for c in COLUMNS if c not in candidate]
    if missing:
        log.warning(
            "generated prompt incomplete (missing %s); falling back to the static prompt",
            ", ".join(missing[:5]),
        )
        prompt = static_prompt()
    else:
        prompt = candidate

    if save_path is not None:
        Path(save_path).write_text(prompt, encoding="utf-8")
    return prompt
