"""Content-addressed LRU cache for image embeddings."""

import hashlib
import threading
from collections import OrderedDict
from typing import Callable, Optional

import numpy as np

from ..core.records import ImageEmbedding


def content_key(image: np.ndarray) -> str:
    """SHA-256 over the raster's shape, dtype and bytes."""
    image = np.ascontiguousarray(image)
    digest = hashlib.sha256()
    digest.update(f"{image.shape}|{image.dtype}".encode("utf-8"))
    digest.update(image.tobytes())
    return digest.hexdigest()


class EmbeddingCache:
    """
    Bounded LRU map from image content to its embedding.

    A capacity of 0 disables caching. Lookups and inserts are serialized with
    a lock so concurrent inference calls can share one cache.
    """

    def __init__(self, capacity: int = 0):
        self.capacity = max(0, int(capacity))
        self._items: "OrderedDict[str, ImageEmbedding]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._items)

    def get(self, key: str) -> Optional[ImageEmbedding]:
        with self._lock:
            item = self._items.get(key)
            if item is not None:
                self._items.move_to_end(key)
            return item

    def put(self, key: str, embedding: ImageEmbedding):
        if self.capacity == 0:
            return
        with self._lock:
            self._items[key] = embedding
            self._items.move_to_end(key)
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)

    def get_or_compute(self, image: np.ndarray, compute: Callable[[np.ndarray], ImageEmbedding]) -> ImageEmbedding:
        if self.capacity == 0:
            self.misses += 1
            return compute(image)
        key = content_key(image)
        cached = self.get(key)
        if cached is not None:
            self.hits += 1
            return cached
        self.misses += 1
        embedding = compute(image)
        self.put(key, embedding)
        return embedding

    def clear(self):
        with self._lock:
            self._items.clear()
