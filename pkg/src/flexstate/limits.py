"""Size and range limits enforced at the API boundary."""

MAX_ID_BYTES = 128
MAX_MAP_KEY_BYTES = 1024
MAX_ELEMENT_BYTES = 1024
MAX_BLOB_BYTES = 65536

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
