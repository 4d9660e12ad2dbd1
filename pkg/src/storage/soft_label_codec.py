"""
File container for soft segmentation labels.

Layout, little-endian:

    "DSSL"          magic
    u32 version     currently 1
    u32 h, u32 w    dims
    u32 C           object class count
    h*w x u32       per pixel: 0xFFFFFFFF for UNCERTAIN, otherwise the class bitmask
                    (bit c set when class c is in the pixel's set)
"""

import logging
import os
import struct
import numpy as np
from src.boxmask.soft_label import SoftSegLabel, MAX_SOFT_CLASSES
from src.lib.core import Dims
from src.lib.exceptions import SoftLabelFormatError

MAGIC = b"DSSL"
VERSION = 1
UNCERTAIN_WORD = 0xFFFFFFFF
_HEADER = struct.Struct("<4sIIII")

log = logging.getLogger(__name__)


def _foreign_bits(num_classes):
    """Bits of classes above C."""
    return np.uint32(UNCERTAIN_WORD ^ ((1 << (num_classes + 1)) - 1))


def encode_soft_label(soft, num_classes):
    """
    Serializes a soft label.

    Raises:
        SoftLabelFormatError: If C is outside 1..31 or a bitmask names a class above C.
    """
    if not 1 <= num_classes <= MAX_SOFT_CLASSES:
        raise SoftLabelFormatError(f"Soft labels hold 1..{MAX_SOFT_CLASSES} classes, got {num_classes}")
    words = soft.bitmasks.astype("<u4")
    if np.any(words & _foreign_bits(num_classes)):
        raise SoftLabelFormatError(f"Soft label names a class above C={num_classes}")
    words[soft.uncertain] = UNCERTAIN_WORD
    header = _HEADER.pack(MAGIC, VERSION, soft.dims.h, soft.dims.w, num_classes)
    return header + words.tobytes()


def decode_soft_label(data):
    """
    Parses a soft-label container.

    Returns:
        tuple[SoftSegLabel, int]: The label and its class count C.

    Raises:
        SoftLabelFormatError: On a bad magic, version, size or class bit.
    """
    if len(data) < _HEADER.size:
        raise SoftLabelFormatError("Soft-label file is shorter than its header")
    magic, version, h, w, num_classes = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SoftLabelFormatError("Not a soft-label file: bad magic bytes")
    if version != VERSION:
        raise SoftLabelFormatError(f"Soft-label version {version} is not supported")
    if h < 1 or w < 1 or not 1 <= num_classes <= MAX_SOFT_CLASSES:
        raise SoftLabelFormatError(f"Bad soft-label header: {h}x{w}, C={num_classes}")
    payload = data[_HEADER.size:]
    if len(payload) != 4 * h * w:
        raise SoftLabelFormatError(f"Expected {4 * h * w} payload bytes, found {len(payload)}")
    words = np.frombuffer(payload, dtype="<u4")
    uncertain = words == UNCERTAIN_WORD
    bitmasks = np.where(uncertain, 0, words).astype(np.uint32)
    if np.any(bitmasks & _foreign_bits(num_classes)):
        raise SoftLabelFormatError(f"Soft label names a class above C={num_classes}")
    if np.any((bitmasks == 0) & ~uncertain):
        raise SoftLabelFormatError("Soft label has a pixel with an empty class set")
    return SoftSegLabel(Dims(h, w), bitmasks, uncertain), num_classes


def write_soft_label(path, soft, num_classes):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "wb") as handle:
            handle.write(encode_soft_label(soft, num_classes))
    except OSError as e:
        log.error("Cannot write soft label %s: %s", path, e)
        raise SoftLabelFormatError(f"Cannot write soft label '{path}': {e}") from e


def read_soft_label(path):
    """
    Returns:
        tuple[SoftSegLabel, int]: The label and its class count C.
    """
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as e:
        log.error("Cannot read soft label %s: %s", path, e)
        raise SoftLabelFormatError(f"Cannot read soft label '{path}': {e}") from e
    return decode_soft_label(data)
