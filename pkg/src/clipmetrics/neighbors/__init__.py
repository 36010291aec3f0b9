from .index import (
    BACKENDS,
    KnnTable,
    NeighborIndex,
    build_index,
    count_within,
    knn_distances,
    resolve_backend,
)

__all__ = [
    "BACKENDS",
    "KnnTable",
    "NeighborIndex",
    "build_index",
    "count_within",
    "knn_distances",
    "resolve_backend",
]
