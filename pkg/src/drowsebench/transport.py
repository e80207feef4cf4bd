"""Loopback echo server and paced streaming client.

The client sends frames over TCP at a fixed rate and the server echoes
each one back with its receive/send timestamps appended.  Round-trip
time and the gaps between consecutive echo arrivals are recorded per
frame; the inter-arrival distribution is the throughput measurement.

Frames are paced against an ideal timeline (frame k is sent at
``t0 + k / fps``), so a late frame does not push every later frame
late: pacing error stays bounded instead of accumulating.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import socket
import statistics
import threading
import time
import zlib
from dataclasses import dataclass
from pathlib import Path

from .protocol import (
    CodecError,
    FrameMessage,
    MessageType,
    PixelFormat,
    expected_payload_len,
    read_frame,
    write_frame,
)

log = logging.getLogger(__name__)

RTT_CSV_HEADER = ["frame_id", "send_ts_us", "recv_ts_us", "rtt_us", "inter_arrival_us"]


class ProtocolError(RuntimeError):
    """Session-level violation: out-of-order echo, bad payload, timeout."""


def monotonic_us() -> int:
    return time.monotonic_ns() // 1000


@dataclass(frozen=True)
class RoundTripRecord:
    """One frame's life cycle as seen by the client clock."""

    frame_id: int
    send_ts_us: int
    recv_ts_us: int
    rtt_us: int
    inter_arrival_us: int | None


@dataclass(frozen=True)
class IntervalStats:
    """Summary of the gaps between consecutive echo arrivals."""

    count: int
    mean_us: float
    std_us: float
    median_us: float
    min_us: int
    max_us: int


def interval_stats(records: list[RoundTripRecord]) -> IntervalStats:
    """Population statistics over the inter-arrival gaps.

    Needs at least two records (one gap).  The mean times the gap count
    telescopes back to ``last_recv - first_recv``.
    """
    gaps = [r.inter_arrival_us for r in records if r.inter_arrival_us is not None]
    if not gaps:
        raise ValueError("need at least two records to compute inter-arrival stats")
    return IntervalStats(
        count=len(gaps),
        mean_us=statistics.fmean(gaps),
        std_us=statistics.pstdev(gaps),
        median_us=statistics.median(gaps),
        min_us=min(gaps),
        max_us=max(gaps),
    )


def raw_bandwidth(width: int, height: int, bits_per_pixel: int, fps: int) -> int:
    """Uncompressed bit rate of a video stream, as an exact product.

    1280x720 at 24 bpp and 30 fps is exactly 663_552_000 bit/s.  Figures
    around 632 Mbit/s are sometimes quoted for that configuration; they
    do not match the product and are not reproduced here.
    """
    for name, value in (("width", width), ("height", height),
                        ("bits_per_pixel", bits_per_pixel), ("fps", fps)):
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
    return width * height * bits_per_pixel * fps


class EchoServer:
    """Threaded TCP server that echoes frames back in arrival order.

    Each connection gets its own handler thread, so one connection's
    replies are serialized while multiple connections run concurrently.
    Malformed messages are logged and drop the connection.
    """

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._listener = socket.create_server((host, port))
        # closing the listener does not wake a blocked accept(), so poll
        self._listener.settimeout(0.25)
        self._stopping = threading.Event()
        self._accept_thread: threading.Thread | None = None
        self._lock = threading.Lock()
        self._conns: set[socket.socket] = set()

    @property
    def address(self) -> tuple[str, int]:
        name = self._listener.getsockname()
        return name[0], name[1]

    def start(self) -> "EchoServer":
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="echo-accept", daemon=True
        )
        self._accept_thread.start()
        return self

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, peer = self._listener.accept()
            except TimeoutError:
                continue
            except OSError:
                break
            conn.setblocking(True)
            with self._lock:
                self._conns.add(conn)
            threading.Thread(
                target=self._handle, args=(conn, peer), name="echo-conn", daemon=True
            ).start()

    def _handle(self, conn: socket.socket, peer) -> None:
        try:
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            while True:
                msg = read_frame(conn)
                if msg is None:
                    break
                recv_ts = monotonic_us()
                if msg.msg_type is not MessageType.FRAME:
                    log.warning("peer %s sent %s, expected a frame; closing",
                                peer, msg.msg_type.name)
                    break
                echo = dataclasses.replace(
                    msg,
                    msg_type=MessageType.ECHO,
                    server_recv_ts_us=recv_ts,
                    server_send_ts_us=monotonic_us(),
                )
                write_frame(conn, echo)
        except CodecError as exc:
            log.warning("malformed message from %s: %s", peer, exc)
        except OSError:
            pass
        finally:
            with self._lock:
                self._conns.discard(conn)
            conn.close()

    def stop(self) -> None:
        self._stopping.set()
        self._listener.close()
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5.0)

    def __enter__(self) -> "EchoServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def run_echo_server(host: str, port: int) -> None:
    """Serve echoes on (host, port) until interrupted."""
    server = EchoServer(host, port)
    bound = server.address
    print(f"echo server listening on {bound[0]}:{bound[1]}")
    server.start()
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()


def _sleep_until(deadline_us: int) -> None:
    # Coarse sleep, then short naps for the last millisecond.
    while True:
        remaining = deadline_us - monotonic_us()
        if remaining <= 0:
            return
        if remaining > 1500:
            time.sleep((remaining - 1000) / 1e6)
        else:
            time.sleep(0.0001)


def _make_payload(base: bytes, frame_id: int) -> bytes:
    if len(base) < 8:
        return base
    buf = bytearray(base)
    buf[:8] = frame_id.to_bytes(8, "little")
    return bytes(buf)


def stream_and_measure(
    host: str,
    port: int,
    fps: float,
    n_frames: int,
    width: int,
    height: int,
    pixel_format: PixelFormat = PixelFormat.RGB24,
    timeout_s: float = 30.0,
) -> list[RoundTripRecord]:
    """Stream ``n_frames`` paced frames to an echo server and measure.

    A sender thread paces frames on the ideal timeline while the caller's
    thread reads echoes, so sending never blocks on receiving.  Echoes
    must come back in order with byte-identical payloads (checked via
    CRC32); any violation raises ProtocolError.  Returns one record per
    frame, sorted by frame_id.
    """
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    if n_frames < 2:
        raise ValueError(f"need at least 2 frames, got {n_frames}")

    base = bytes(
        (i * 31 + 7) & 0xFF for i in range(expected_payload_len(pixel_format, width, height))
    )
    period_us = 1e6 / fps
    send_ts: dict[int, int] = {}
    sent_crc: dict[int, int] = {}
    sender_error: list[BaseException] = []

    with socket.create_connection((host, port), timeout=timeout_s) as sock:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

        def send_all() -> None:
            try:
                t0 = monotonic_us()
                for k in range(n_frames):
                    payload = _make_payload(base, k)
                    _sleep_until(int(t0 + k * period_us))
                    now = monotonic_us()
                    msg = FrameMessage(
                        msg_type=MessageType.FRAME,
                        frame_id=k,
                        capture_ts_us=now,
                        width=width,
                        height=height,
                        pixel_format=pixel_format,
                        payload=payload,
                    )
                    send_ts[k] = now
                    sent_crc[k] = zlib.crc32(payload)
                    write_frame(sock, msg)
            except BaseException as exc:  # surfaced by the receive loop
                sender_error.append(exc)

        sender = threading.Thread(target=send_all, name="frame-sender", daemon=True)
        sender.start()

        records: list[RoundTripRecord] = []
        prev_recv: int | None = None
        try:
            for k in range(n_frames):
                msg = read_frame(sock)
                recv = monotonic_us()
                if msg is None:
                    raise ProtocolError(
                        f"server closed the connection after {len(records)} echoes"
                        + (f" (send failed: {sender_error[0]})" if sender_error else "")
                    )
                if msg.msg_type is not MessageType.ECHO:
                    raise ProtocolError(f"expected an echo, got {msg.msg_type.name}")
                if msg.frame_id != k:
                    raise ProtocolError(f"echo out of order: expected {k}, got {msg.frame_id}")
                if zlib.crc32(msg.payload) != sent_crc[k]:
                    raise ProtocolError(f"echoed payload for frame {k} differs from sent payload")
                records.append(
                    RoundTripRecord(
                        frame_id=k,
                        send_ts_us=send_ts[k],
                        recv_ts_us=recv,
                        rtt_us=recv - send_ts[k],
                        inter_arrival_us=None if prev_recv is None else recv - prev_recv,
                    )
                )
                prev_recv = recv
        except socket.timeout:
            raise ProtocolError(
                f"timed out after {len(records)} echoes waiting for the next one"
            ) from None
        finally:
            sender.join(timeout=timeout_s)

    if sender_error:
        raise ProtocolError(f"send failed: {sender_error[0]}") from sender_error[0]
    return records


def write_rtt_csv(records: list[RoundTripRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RTT_CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.frame_id,
                    r.send_ts_us,
                    r.recv_ts_us,
                    r.rtt_us,
                    "" if r.inter_arrival_us is None else r.inter_arrival_us,
                ]
            )


def read_rtt_csv(path: str | Path) -> list[RoundTripRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RTT_CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames} in {path}")
        for row in reader:
            records.append(
                RoundTripRecord(
                    frame_id=int(row["frame_id"]),
                    send_ts_us=int(row["send_ts_us"]),
                    recv_ts_us=int(row["recv_ts_us"]),
                    rtt_us=int(row["rtt_us"]),
                    inter_arrival_us=(
                        int(row["inter_arrival_us"]) if row["inter_arrival_us"] else None
                    ),
                )
            )
    return records
