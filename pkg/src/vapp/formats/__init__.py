"""Low-level format readers shared by all extractors."""

from .readers import (
    ENTROPY_THRESHOLD,
    ENTROPY_WINDOW,
    DecodedImage,
    LossyReal,
    decode_base64_image,
    detect_encrypted_db,
    gunzip,
    read_gzip_json,
    read_json,
    read_plist,
    read_tlv_mapsettings,
    read_xml_prefs,
    scan_json_bodies,
    shannon_entropy,
    sniff_image,
)
from .sqlite import MAGIC as SQLITE_MAGIC
from .sqlite import Table, TableSet, read_sqlite

__all__ = [
    "ENTROPY_THRESHOLD",
    "ENTROPY_WINDOW",
    "SQLITE_MAGIC",
    "DecodedImage",
    "LossyReal",
    "Table",
    "TableSet",
    "decode_base64_image",
    "detect_encrypted_db",
    "gunzip",
    "read_gzip_json",
    "read_json",
    "read_plist",
    "read_sqlite",
    "read_tlv_mapsettings",
    "read_xml_prefs",
    "scan_json_bodies",
    "shannon_entropy",
    "sniff_image",
]
