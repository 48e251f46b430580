"""Document parsing orchestration: layout filtering, reading order, recognition
requests, OTSL tables, document assembly, a batched pipeline and metrics."""

__version__ = "0.1.0"
SCHEMA_VERSION = "1"
