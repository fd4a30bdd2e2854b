from .cache import BufferCache, CacheExhausted, PagedFile, Page
from .btree import BTree
from .lsm import LsmIndex
from .vertexindex import VertexIndex
from .framing import write_frame, iter_frames, TAG_NULL, TAG_VALUE, TAG_LIST

__all__ = [
    "BufferCache",
    "CacheExhausted",
    "PagedFile",
    "Page",
    "BTree",
    "LsmIndex",
    "VertexIndex",
    "write_frame",
    "iter_frames",
    "TAG_NULL",
    "TAG_VALUE",
    "TAG_LIST",
]
