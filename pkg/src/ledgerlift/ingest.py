"""PDF to page-image manifest via an external rasterizer.

Rendering is delegated to a command-line tool (pdftoppm by default) behind a
narrow template interface, so a different converter slots in without code
changes. Pages are recorded with their orientation but never auto-rotated;
the vision backend receives each image exactly as rasterized.
"""

from __future__ import annotations

import logging
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .core import LedgerliftError

log = logging.getLogger(__name__)

DEFAULT_DPI = 300

# Placeholders: {dpi}, {pdf}, {prefix}. pdftoppm writes {prefix}-<n>.jpg.
DEFAULT_TOOL: tuple[str, ...] = (
    "pdftoppm",
    "-jpeg",
    "-r",
    "{dpi}",
    "{pdf}",
    "{prefix}",
)

MANIFEST_NAME = "manifest.tsv"

PORTRAIT = "Portrait"
LANDSCAPE = "Landscape"


class RasterizerFailed(LedgerliftError, RuntimeError):
    """The external converter exited non-zero; stderr is preserved."""


@dataclass(frozen=True)
class PageImage:
    page_number: int
    image_path: str
    dpi: int
    orientation: str


def _page_sort_key(path: Path) -> int:
    match = re.search(r"(\d+)(?=\.\w+$)", path.name)
    if match is None:
        raise RasterizerFailed(f"cannot find a page number in {path.name!r}")
    return int(match.group(1))


def _orientation(path: Path) -> str:
    with Image.open(path) as img:
        width, height = img.size
    return LANDSCAPE if width > height else PORTRAIT


def rasterize(
    pdf_path: Path | str,
    dpi: int = DEFAULT_DPI,
    out_dir: Path | str = ".",
    tool: tuple[str, ...] = DEFAULT_TOOL,
) -> list[PageImage]:
    """Render every page of a PDF to an image and persist the manifest.

    The tool template is formatted with dpi, pdf and an output prefix; the
    produced files are collected by the page number embedded in their
    names. Raises FileNotFoundError for a missing PDF and RasterizerFailed
    when the tool exits non-zero.
    """
    pdf = Path(pdf_path)
    if not pdf.is_file():
        raise FileNotFoundError(str(pdf))
    if dpi < 72:
        raise ValueError(f"dpi {dpi} below the 72 dpi floor")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = out / "page"
    command = [arg.format(dpi=dpi, pdf=pdf, prefix=prefix) for arg in tool]
    log.info("rasterizing %s at %d dpi", pdf, dpi)
    completed = subprocess.run(command, capture_output=True, text=True)
    if completed.returncode != 0:
        raise RasterizerFailed(
            f"{command[0]} exited {completed.returncode}: {completed.stderr.strip()}"
        )

    produced = sorted(
        (p for p in out.glob("page-*") if p.is_file()),
        key=_page_sort_key,
    )
    if not produced:
        raise RasterizerFailed(f"{command[0]} produced no page images in {out}")

    pages = [
        PageImage(
            page_number=index,
            image_path=str(path),
            dpi=dpi,
            orientation=_orientation(path),
        )
        for index, path in enumerate(produced, start=1)
    ]
    save_manifest(pages, out / MANIFEST_NAME)
    return pages


def save_manifest(pages: list[PageImage], path: Path | str) -> None:
    """Write the page manifest; image paths under the manifest's directory
    are stored relative so a corpus directory can be moved wholesale."""
    base = Path(path).parent.resolve()

    def portable(image_path: str) -> str:
        try:
            return str(Path(image_path).resolve().relative_to(base))
        except ValueError:
            return image_path

    body = "".join(
        f"{p.page_number}\t{portable(p.image_path)}\t{p.dpi}\t{p.orientation}\n"
        for p in pages
    )
    Path(path).write_text(body, encoding="utf-8")


def load_manifest(path: Path | str) -> list[PageImage]:
    base = Path(path).parent
    pages = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        number, image_path, dpi, orientation = line.split("\t")
        resolved = Path(image_path)
        if not resolved.is_absolute():
            resolved = base / resolved
        pages.append(
            PageImage(
                page_number=int(number),
                image_path=str(resolved),
                dpi=int(dpi),
                orientation=orientation,
            )
        )
    expected = list(range(1, len(pages) + 1))
    if [p.page_number for p in pages] != expected:
        raise LedgerliftError(f"manifest {path} pages are not contiguous from 1")
    return pages
