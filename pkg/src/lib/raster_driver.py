"""
RasterDriver module for reading and writing the toolkit's binary rasters.

This module defines the `RasterDriver` class, which provides a small interface for
binary PPM (P6, 8-bit RGB) images and binary PGM (P5, 8-bit gray) label and strength
maps, translating Pillow and filesystem failures into the toolkit's storage exceptions.

Strength maps are stored as value = round(255 * strength). `quantize_strength` applies
the same rounding in memory, so a strength map that went through a file and one that
did not feed identical numbers into the box-to-mask pipeline.

Classes:
    RasterDriver: Reads and writes PPM/PGM rasters as numpy arrays.

Exceptions:
    RasterIOError: Raised when a file cannot be opened, read or written.
    RasterFormatError: Raised when a file is not the expected PPM/PGM kind.
"""

import logging
import os
import numpy as np
from PIL import Image, UnidentifiedImageError
from src.lib.exceptions import RasterIOError
from src.lib.exceptions import RasterFormatError

STRENGTH_LEVELS = 255

_MODES = {
    "rgb": ("RGB", 3),
    "gray": ("L", 2),
}


def quantize_strength(strength):
    """
    Rounds strengths in [0, 1] to the 8-bit grid used on disk.

    Args:
        strength (np.ndarray): Nonnegative strengths; values above 1 are clipped.

    Returns:
        np.ndarray: float64 strengths, each an exact multiple of 1/255.
    """
    codes = np.rint(np.clip(strength, 0.0, 1.0) * STRENGTH_LEVELS)
    return codes / STRENGTH_LEVELS


class RasterDriver():
    """
    A simple driver for 8-bit PPM/PGM rasters.

    Attributes:
        log (logging.Logger): Logger instance for debugging and error logging.
    """

    def __init__(self) -> None:
        """
        Initializes the RasterDriver with its logger.
        """
        self.log = logging.getLogger(__name__)

    def read(self, path, kind) -> np.ndarray:
        """
        Reads a raster of the given kind.

        Args:
            path (str): File to read.
            kind (str): "rgb" for PPM images, "gray" for PGM maps.

        Returns:
            np.ndarray: uint8 array of shape (h, w, 3) or (h, w).

        Raises:
            RasterIOError: If the file cannot be opened.
            RasterFormatError: If the file is not a PPM/PGM raster of the requested kind.
        """
        mode, ndim = _MODES[kind]
        self.log.debug("Reading %s raster: %s", kind, path)
        try:
            with Image.open(path) as image:
                if image.format != "PPM" or image.mode != mode:
                    self.log.error("Unexpected raster %s (%s, %s)", path, image.format, image.mode)
                    raise RasterFormatError(
                        f"{path}: expected a binary {'PPM' if kind == 'rgb' else 'PGM'} "
                        f"raster, found {image.format} in mode {image.mode}")
                data = np.array(image, dtype=np.uint8)

        except UnidentifiedImageError as e:
            self.log.error("Unreadable raster: %s", path)
            raise RasterFormatError(f"{path}: not a PPM/PGM raster") from e

        except OSError as e:
            self.log.error("Raster IO error on %s: %s", path, e)
            raise RasterIOError(f"Cannot read raster {path}: {e}") from e

        if data.ndim != ndim:
            raise RasterFormatError(f"{path}: decoded array has shape {data.shape}")
        return data

    def write(self, path, data, kind) -> None:
        """
        Writes a uint8 array as a binary PPM (kind "rgb") or PGM (kind "gray").

        Raises:
            RasterFormatError: If the array shape does not fit the kind.
            RasterIOError: If the file cannot be written.
        """
        mode, ndim = _MODES[kind]
        data = np.asarray(data)
        if data.ndim != ndim or (kind == "rgb" and data.shape[2] != 3):
            raise RasterFormatError(f"Cannot store shape {data.shape} as a {kind} raster")
        if data.dtype != np.uint8:
            if data.min(initial=0) < 0 or data.max(initial=0) > 255:
                raise RasterFormatError(f"Values of {path} do not fit in 8 bits")
            data = data.astype(np.uint8)
        self.log.debug("Writing %s raster: %s", kind, path)
        try:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            image = Image.fromarray(np.ascontiguousarray(data))
            if image.mode != mode:
                raise RasterFormatError(f"Array for {path} decodes as mode {image.mode}")
            image.save(path, format="PPM")

        except OSError as e:
            self.log.error("Raster IO error on %s: %s", path, e)
            raise RasterIOError(f"Cannot write raster {path}: {e}") from e

    def read_strength(self, path) -> np.ndarray:
        """
        Reads a PGM strength map as float64 strengths value / 255.
        """
        return self.read(path, "gray").astype(np.float64) / STRENGTH_LEVELS

    def write_strength(self, path, strength) -> None:
        """
        Writes strengths in [0, 1] as a PGM with value = round(255 * strength).
        """
        codes = np.rint(np.clip(strength, 0.0, 1.0) * STRENGTH_LEVELS).astype(np.uint8)
        self.write(path, codes, "gray")
