from ..plan import partition_fn
from .channel import Channel, ChannelClosed, Policy
from .connectors import mton_partition, mton_partition_merge
from .groupby import (
    make_combiner,
    sort_group_by,
    hashsort_group_by,
    preclustered_group_by,
)
from .joins import (
    index_full_outer_join,
    index_left_outer_join,
    merge_msg_vid,
    null_msg,
)

__all__ = [
    "partition_fn",
    "Channel",
    "ChannelClosed",
    "Policy",
    "mton_partition",
    "mton_partition_merge",
    "make_combiner",
    "sort_group_by",
    "hashsort_group_by",
    "preclustered_group_by",
    "index_full_outer_join",
    "index_left_outer_join",
    "merge_msg_vid",
    "null_msg",
]
