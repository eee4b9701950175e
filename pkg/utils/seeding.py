# utils/seeding.py

"""
Seeding Utilities
Derives reproducible child generators from one root seed.

Child seeds are the first 8 bytes (big endian) of sha256 over
"root|label|label...". Generators are numpy Philox (a counter-based
64-bit generator), so streams reproduce across platforms and do not
depend on the order in which they are created.
"""

import hashlib

import numpy as np

GENERATOR_NAME = "numpy.Philox/sha256-v1"


def derive_seed(root_seed: int, *labels) -> int:
    text = "|".join([str(int(root_seed)), *(str(label) for label in labels)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(root_seed: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(derive_seed(root_seed, *labels)))
