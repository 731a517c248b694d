import json
import sys
import textwrap

import pytest

from ledgerlift.ingest import (
    LANDSCAPE,
    PORTRAIT,
    PageImage,
    RasterizerFailed,
    load_manifest,
    rasterize,
    save_manifest,
)

# A stand-in rasterizer with the same call shape as pdftoppm: it reads page
# sizes from the "PDF" (a JSON file) and writes one PNG per page.
STUB = textwrap.dedent(
    """
    import json, sys
    from PIL import Image

    def main():
        args = sys.argv[1:]
        dpi = int(args[args.index("-r") + 1])
        pdf, prefix = args[-2], args[-1]
        spec = json.loads(open(pdf).read())
        if spec.get("fail"):
            sys.stderr.write("stub: cannot render\\n")
            sys.exit(3)
        for number, (w, h) in enumerate(spec["pages"], start=1):
            Image.new("L", (w, h), color=200).save(f"{prefix}-{number:02d}.png")

    main()
    """
)


@pytest.fixture()
def stub_tool(tmp_path):
    script = tmp_path / "stub_rasterizer.py"
    script.write_text(STUB)
    return (sys.executable, str(script), "-r", "{dpi}", "{pdf}", "{prefix}")


def _pdf(tmp_path, pages, fail=False):
    path = tmp_path / "volume.pdf"
    path.write_text(json.dumps({"pages": pages, "fail": fail}))
    return path


class TestRasterize:
    def test_three_page_pdf(self, tmp_path, stub_tool):
        pdf = _pdf(tmp_path, [[100, 140], [100, 140], [100, 140]])
        pages = rasterize(pdf, dpi=300, out_dir=tmp_path / "out", tool=stub_tool)
        assert [p.page_number for p in pages] == [1, 2, 3]
        assert all(p.dpi == 300 for p in pages)
        assert all(p.orientation == PORTRAIT for p in pages)

    def test_wide_page_is_landscape(self, tmp_path, stub_tool):
        pdf = _pdf(tmp_path, [[100, 140], [140, 100]])
        pages = rasterize(pdf, dpi=150, out_dir=tmp_path / "out", tool=stub_tool)
        assert [p.orientation for p in pages] == [PORTRAIT, LANDSCAPE]

    def test_missing_pdf(self, tmp_path, stub_tool):
        with pytest.raises(FileNotFoundError):
            rasterize(tmp_path / "nope.pdf", out_dir=tmp_path / "out", tool=stub_tool)

    def test_dpi_floor(self, tmp_path, stub_tool):
        pdf = _pdf(tmp_path, [[100, 140]])
        with pytest.raises(ValueError):
            rasterize(pdf, dpi=50, out_dir=tmp_path / "out", tool=stub_tool)

    def test_tool_failure_captures_stderr(self, tmp_path, stub_tool):
        pdf = _pdf(tmp_path, [[100, 140]], fail=True)
        with pytest.raises(RasterizerFailed, match="cannot render"):
            rasterize(pdf, out_dir=tmp_path / "out", tool=stub_tool)

    def test_manifest_written_and_idempotent(self, tmp_path, stub_tool):
        pdf = _pdf(tmp_path, [[100, 140], [100, 140]])
        out = tmp_path / "out"
        rasterize(pdf, out_dir=out, tool=stub_tool)
        first = (out / "manifest.tsv").read_bytes()
        rasterize(pdf, out_dir=out, tool=stub_tool)
        assert (out / "manifest.tsv").read_bytes() == first


class TestManifest:
    def test_round_trip(self, tmp_path):
        (tmp_path / "a.img").write_bytes(b"a")
        pages = [PageImage(1, str(tmp_path / "a.img"), 300, PORTRAIT)]
        save_manifest(pages, tmp_path / "manifest.tsv")
        loaded = load_manifest(tmp_path / "manifest.tsv")
        assert loaded == pages

    def test_relative_paths_resolve_against_manifest(self, tmp_path):
        sub = tmp_path / "corpus"
        sub.mkdir()
        (sub / "img.img").write_bytes(b"x")
        (sub / "manifest.tsv").write_text("1\timg.img\t300\tPortrait\n")
        (page,) = load_manifest(sub / "manifest.tsv")
        assert page.image_path == str(sub / "img.img")

    def test_gap_in_page_numbers_rejected(self, tmp_path):
        (tmp_path / "manifest.tsv").write_text(
            "1\ta.img\t300\tPortrait\n3\tb.img\t300\tPortrait\n"
        )
        with pytest.raises(Exception, match="contiguous"):
            load_manifest(tmp_path / "manifest.tsv")
