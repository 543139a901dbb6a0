"""Frame-sequence I/O: numbered PNG/PPM directories and Y4M streams, plus the
bicubic LR preparation step with its manifest.

All formats are 8-bit.  Directory ordering is numeric on the last digit run
in the filename, so frame_2.png sorts before frame_10.png regardless of
zero padding."""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .imaging import Frame, resample_bicubic, round_u8


class SequenceError(Exception):
    """I/O-level failure: unreadable, malformed, or inconsistent inputs."""


_NUMBER = re.compile(r"(\d+)(?!.*\d)")


def _frame_key(path: Path):
    match = _NUMBER.search(path.stem)
    return (0, int(match.group(1)), path.name) if match else (1, 0, path.name)


def _load_png(path: Path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            if img.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise SequenceError(f"{path}: unsupported bit depth (mode {img.mode})")
            if img.mode == "L":
                return np.asarray(img)[:, :, None]
            if img.mode != "RGB":
                img = img.convert("RGB")
            return np.asarray(img)
    except UnidentifiedImageError as exc:
        raise SequenceError(f"{path}: decode failure: {exc}") from exc
    except OSError as exc:
        raise SequenceError(f"{path}: decode failure: {exc}") from exc


def _load_ppm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if not raw.startswith(b"P6"):
        raise SequenceError(f"{path}: not a binary PPM (P6) file")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise SequenceError(f"{path}: truncated PPM header")
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise SequenceError(f"{path}: malformed PPM header") from exc
    if maxval != 255:
        raise SequenceError(f"{path}: unsupported bit depth (maxval {maxval})")
    need = width * height * 3
    pixels = raw[pos : pos + need]
    if len(pixels) != need:
        raise SequenceError(f"{path}: decode failure: expected {need} pixel bytes")
    return np.frombuffer(pixels, np.uint8).reshape(height, width, 3)


# BT.601 limited-range RGB <-> YUV
_YUV_OFFSET = np.array([16.0, 128.0, 128.0])
_RGB_TO_YUV = (
    np.array(
        [
            [65.481, 128.553, 24.966],
            [-37.797, -74.203, 112.0],
            [112.0, -93.786, -18.214],
        ]
    )
    / 255.0
)
_YUV_TO_RGB = np.linalg.inv(_RGB_TO_YUV)


def _yuv_to_rgb(y: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    yuv = np.stack([y, u, v], axis=-1).astype(np.float64) - _YUV_OFFSET
    return round_u8(yuv @ _YUV_TO_RGB.T)


def _rgb_to_yuv(rgb: np.ndarray) -> np.ndarray:
    yuv = rgb.astype(np.float64) @ _RGB_TO_YUV.T + _YUV_OFFSET
    return round_u8(yuv)


def load_y4m(path) -> list[Frame]:
    path = Path(path)
    raw = path.read_bytes()
    end = raw.find(b"\n")
    if end < 0 or not raw.startswith(b"YUV4MPEG2"):
        raise SequenceError(f"{path}: not a Y4M stream")
    width = height = None
    colorspace = "C420"
    for token in raw[:end].split()[1:]:
        tag, value = chr(token[0]), token[1:].decode("ascii", "replace")
        if tag == "W":
            width = int(value)
        elif tag == "H":
            height = int(value)
        elif tag == "C":
            colorspace = "C" + value
    if not width or not height:
        raise SequenceError(f"{path}: Y4M header missing W or H")
    if colorspace == "C444":
        subsampled = False
    elif colorspace in ("C420", "C420jpeg", "C420mpeg2", "C420paldv"):
        subsampled = True
        if width % 2 or height % 2:
            raise SequenceError(f"{path}: 4:2:0 stream with odd dimensions {width}x{height}")
    else:
        raise SequenceError(f"{path}: unsupported colorspace {colorspace}")

    luma_size = width * height
    chroma_size = (width // 2) * (height // 2) if subsampled else luma_size
    frames = []
    pos = end + 1
    while pos < len(raw):
        line_end = raw.find(b"\n", pos)
        if line_end < 0 or not raw[pos:line_end].startswith(b"FRAME"):
            raise SequenceError(f"{path}: malformed FRAME marker at byte {pos}")
        pos = line_end + 1
        need = luma_size + 2 * chroma_size
        if pos + need > len(raw):
            raise SequenceError(f"{path}: truncated frame payload at byte {pos}")
        y = np.frombuffer(raw, np.uint8, luma_size, pos).reshape(height, width)
        u = np.frombuffer(raw, np.uint8, chroma_size, pos + luma_size)
        v = np.frombuffer(raw, np.uint8, chroma_size, pos + luma_size + chroma_size)
        pos += need
        if subsampled:
            u = u.reshape(height // 2, width // 2).repeat(2, 0).repeat(2, 1)
            v = v.reshape(height // 2, width // 2).repeat(2, 0).repeat(2, 1)
        else:
            u = u.reshape(height, width)
            v = v.reshape(height, width)
        frames.append(Frame(_yuv_to_rgb(y, u, v), frame_index=len(frames)))
    if not frames:
        raise SequenceError(f"{path}: stream carries no frames")
    return frames


def save_y4m(path, frames: list[Frame], fps=(30, 1), subsample: bool = False):
    path = Path(path)
    if not frames:
        raise SequenceError("cannot write an empty Y4M stream")
    width, height = frames[0].width, frames[0].height
    colorspace = "C420" if subsample else "C444"
    if subsample and (width % 2 or height % 2):
        raise SequenceError(f"4:2:0 output needs even dimensions, got {width}x{height}")
    with path.open("wb") as fh:
        fh.write(f"YUV4MPEG2 W{width} H{height} F{fps[0]}:{fps[1]} Ip A1:1 {colorspace}\n".encode())
        for frame in frames:
            rgb = frame.data if frame.channels == 3 else np.repeat(frame.data, 3, axis=2)
            yuv = _rgb_to_yuv(rgb)
            fh.write(b"FRAME\n")
            fh.write(yuv[:, :, 0].tobytes())
            for plane in (1, 2):
                channel = yuv[:, :, plane]
                if subsample:
                    quad = channel.astype(np.float64)
                    channel = round_u8(
                        0.25
                        * (quad[0::2, 0::2] + quad[1::2, 0::2] + quad[0::2, 1::2] + quad[1::2, 1::2])
                    )
                fh.write(channel.tobytes())


def load_sequence(path) -> list[Frame]:
    """Load a directory of numbered PNG/PPM frames or one Y4M file."""
    path = Path(path)
    if path.is_file():
        if path.suffix.lower() == ".y4m":
            return load_y4m(path)
        raise SequenceError(f"{path}: single-file input must be a .y4m stream")
    if not path.is_dir():
        raise SequenceError(f"{path}: no such file or directory")
    files = sorted(
        (p for p in path.iterdir() if p.suffix.lower() in (".png", ".ppm")),
        key=_frame_key,
    )
    if not files:
        raise SequenceError(f"{path}: no .png or .ppm frames found")
    frames = []
    dims = None
    for file in files:
        data = _load_ppm(file) if file.suffix.lower() == ".ppm" else _load_png(file)
        if dims is None:
            dims = data.shape
        elif data.shape != dims:
            raise SequenceError(
                f"mixed frame dimensions: {dims[1]}x{dims[0]} vs "
                f"{data.shape[1]}x{data.shape[0]} ({file.name})"
            )
        frames.append(Frame(data, frame_index=len(frames)))
    return frames


def save_sequence(directory, frames: list[Frame], fmt: str = "png"):
    """Write frames as numbered files; PNG keeps any channel count, PPM is RGB only."""
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = len(str(max(len(frames) - 1, 1)))
    for i, frame in enumerate(frames):
        name = f"{i:0{width}d}.{fmt}"
        if fmt == "png":
            data = frame.data[:, :, 0] if frame.channels == 1 else frame.data
            Image.fromarray(data).save(directory / name)
        elif fmt == "ppm":
            if frame.channels != 3:
                raise SequenceError("PPM output requires 3-channel frames")
            header = f"P6\n{frame.width} {frame.height}\n255\n".encode()
            (directory / name).write_bytes(header + frame.data.tobytes())
        else:
            raise SequenceError(f"unknown output format {fmt!r}")


def prepare_lr(gt_frames: list[Frame], scale: int) -> tuple[list[Frame], dict]:
    """Bicubic 1/scale downsampling of a ground-truth sequence plus the
    manifest describing how the LR set was produced."""
    if scale < 1:
        raise ValueError("scale must be a positive integer")
    lr = []
    for frame in gt_frames:
        if frame.width % scale or frame.height % scale:
            raise ValueError(
                f"frame {frame.width}x{frame.height} not divisible by scale {scale}"
            )
        lr.append(
            Frame(resample_bicubic(frame, 1.0 / scale).data, frame_index=frame.frame_index)
        )
    manifest = {
        "kernel": "bicubic",
        "kernel_a": -0.5,
        "scale": scale,
        "frames": len(lr),
        "lr_size": [lr[0].width, lr[0].height] if lr else [0, 0],
    }
    return lr, manifest


def write_json(path, payload: dict):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
