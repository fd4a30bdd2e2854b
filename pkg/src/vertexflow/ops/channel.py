"""Bounded FIFO transfer endpoints between one producer task and one
consumer task.

Two materialization policies: FULLY_PIPELINED hands batches to the consumer
through a bounded queue and blocks the producer when it is full;
SENDER_MATERIALIZING never blocks the producer: batches are spooled to a
local temporary file and a second sender-side activity drains the file
toward the consumer.  The merging connector requires the latter to avoid
the classic merge-connector deadlock.
"""

from __future__ import annotations

import enum
import os
import pickle
import queue
import struct
import tempfile
import threading


class ChannelClosed(RuntimeError):
    pass


class Policy(enum.Enum):
    FULLY_PIPELINED = "pipelined"
    SENDER_MATERIALIZING = "materializing"


_EOS = object()
_LEN = struct.Struct(">I")


class Channel:
    def __init__(self, policy: Policy, capacity: int = 64, tmp_dir: str = None):
        self.policy = policy
        self._queue = queue.Queue(maxsize=capacity)
        self._closed = False
        self._error = None
        self.bytes_transferred = 0
        if policy is Policy.SENDER_MATERIALIZING:
            self._spool = tempfile.TemporaryFile(dir=tmp_dir)
            self._spool_lock = threading.Condition()
            self._spool_done = False
            self._drainer = threading.Thread(target=self._drain, daemon=True)
            self._drainer.start()

    # -- producer side ----------------------------------------------------

    def put(self, batch: list) -> None:
        if self._closed:
            raise ChannelClosed("put on closed channel")
        if self.policy is Policy.FULLY_PIPELINED:
            self._queue.put(batch)
        else:
            data = pickle.dumps(batch, protocol=pickle.HIGHEST_PROTOCOL)
            with self._spool_lock:
                self._spool.seek(0, os.SEEK_END)
                self._spool.write(_LEN.pack(len(data)))
                self._spool.write(data)
                self._spool_lock.notify()

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self.policy is Policy.FULLY_PIPELINED:
            self._queue.put(_EOS)
        else:
            with self._spool_lock:
                self._spool_done = True
                self._spool_lock.notify()

    def fail(self, exc: BaseException) -> None:
        """Close the channel, making the consumer re-raise the error."""
        self._error = exc
        self.close()

    def _drain(self) -> None:
        # sender-side activity: pull written batches from the spool file and
        # push them to the receiver
        pos = 0
        while True:
            with self._spool_lock:
                while True:
                    end = self._spool.seek(0, os.SEEK_END)
                    if end > pos or self._spool_done:
                        break
                    self._spool_lock.wait()
                done = self._spool_done
                self._spool.seek(pos)
                chunk = self._spool.read(end - pos)
                pos = end
            off = 0
            while off < len(chunk):
                (n,) = _LEN.unpack_from(chunk, off)
                off += _LEN.size
                batch = pickle.loads(chunk[off : off + n])
                off += n
                self.bytes_transferred += n
                self._queue.put(batch)
            if done and off == 0 and pos == end:
                self._queue.put(_EOS)
                self._spool.close()
                return

    # -- consumer side ------------------------------------------------------

    def batches(self):
        """Yield batches until the producer closes the channel."""
        while True:
            item = self._queue.get()
            if item is _EOS:
                if self._error is not None:
                    raise self._error
                return
            yield item

    def __iter__(self):
        for batch in self.batches():
            yield from batch
