"""Deterministic screenshots of the simulated device.

Text uses Pillow's embedded bitmap font (no anti-aliasing), scaled up with
nearest-neighbour so output is byte-identical on every host.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from functools import lru_cache

from PIL import Image, ImageDraw, ImageFont

from .sim import display_text
from .state import DeviceState, Role

TEXT_SCALE = 3
_FILL = {Role.BUTTON: 225, Role.TEXT_FIELD: 255, Role.LIST_ITEM: 245, Role.LABEL: 255}


@lru_cache(maxsize=1)
def _font() -> ImageFont.ImageFont:
    return ImageFont.load_default_imagefont()


@dataclass(frozen=True)
class VisibleElement:
    """Layout hint attached to simulated screenshots (an a11y-tree stand-in)."""

    id: str
    label: str
    text: str
    role: str
    bbox: tuple[int, int, int, int]


@dataclass(frozen=True)
class Screenshot:
    png: bytes = field(repr=False)
    digest: str
    width: int
    height: int
    elements: tuple[VisibleElement, ...] = ()


def _draw_text(canvas: Image.Image, text: str, x: int, y: int, max_w: int, ink: int = 0) -> None:
    safe = text.encode("latin-1", "replace").decode("latin-1")
    font = _font()
    left, top, right, bottom = font.getbbox(safe or " ")
    w, h = max(right, 1), max(bottom, 1)
    glyphs = Image.new("L", (w, h), 0)
    ImageDraw.Draw(glyphs).text((0, 0), safe, font=font, fill=255)
    glyphs = glyphs.resize((w * TEXT_SCALE, h * TEXT_SCALE), Image.NEAREST)
    if glyphs.width > max_w:
        glyphs = glyphs.crop((0, 0, max(max_w, 1), glyphs.height))
    canvas.paste(ink, (x, y), mask=glyphs)


def _status_bar(state: DeviceState) -> str:
    app_id, screen_id = state.foreground
    return f"{state.clock}   {app_id}/{screen_id}"


def render_screenshot(state: DeviceState) -> bytes:
    """PNG of the foreground screen: white canvas, bordered boxes, element text."""
    w, h = state.screen_dims
    img = Image.new("L", (w, h), 255)
    draw = ImageDraw.Draw(img)
    draw.rectangle((0, 0, w - 1, 60), fill=40)
    _draw_text(img, _status_bar(state), 16, 12, w - 32, ink=255)
    for el in state.visible_elements():
        x, y, bw, bh = el.bbox
        border = 4 if el.id == state.focused_field else 2
        draw.rectangle((x, y, x + bw - 1, y + bh - 1), fill=_FILL[el.role], outline=0, width=border)
        _draw_text(img, display_text(el, state), x + 12, y + 12, bw - 24)
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def screenshot(state: DeviceState) -> Screenshot:
    png = render_screenshot(state)
    elements = tuple(
        VisibleElement(el.id, el.text, display_text(el, state), el.role.value, el.bbox)
        for el in state.visible_elements()
    )
    w, h = state.screen_dims
    return Screenshot(png, hashlib.sha256(png).hexdigest(), w, h, elements)
