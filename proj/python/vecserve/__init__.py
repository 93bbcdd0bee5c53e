"""Python bindings for the vecserve retrieval engine."""

import json as _json

from ._vecserve import (
    ChunkStore,
    IvfPqIndex,
    MappedVamanaGraph,
    ReferenceEncoder,
    VamanaGraph,
    VecserveError,
    ingest_jsonl,
    mmr_select,
)
from ._vecserve import Engine as _Engine

__all__ = [
    "ChunkStore",
    "Engine",
    "IvfPqIndex",
    "MappedVamanaGraph",
    "ReferenceEncoder",
    "VamanaGraph",
    "VecserveError",
    "ingest_jsonl",
    "mmr_select",
]


class Engine:
    """Loads the artifacts named in a serve config and answers searches.

    Keyword arguments to :meth:`search` follow the ``/v1/search`` request
    body, and the return value is the response body as a dict.
    """

    def __init__(self, config_path):
        self._engine = _Engine(str(config_path))

    def search(self, query, **params):
        body = dict(params, query=query)
        return _json.loads(self._engine.search_json(_json.dumps(body)))

    def describe(self):
        return _json.loads(self._engine.describe_json())
