"""Wire protocol for external forecasters.

Newline-delimited JSON over a subprocess's standard streams, or the same
bodies over HTTP POST /forecast. Missing values travel as null; finite
floats round-trip losslessly (shortest-repr encoding on both sides).

Request:  {"protocol_version": 1, "origin": ISO-8601 UTC,
           "target": [{"t": ISO-8601, "v": number|null}, ...],
           "covariates": {name: {"past": [number|null, ...],
                                 "future": [number|null, ...]?}},
           "horizon": int, "quantiles": [number, ...]}
Response: {"median": [number x H], "quantiles": {"0.1": [...], ...}?}
          or {"error": "diagnostic text"}

A capabilities handshake ({"protocol_version": 1, "capabilities": true} ->
{"capabilities": {...}}) lets adapters declare their input tolerance; the
engine needs it and the forecast body has no room for it.
"""

from __future__ import annotations

import json
import subprocess
import threading
import urllib.error
import urllib.request
from datetime import timezone

import numpy as np

from .errors import ForecasterError, WireProtocolError
from .forecast import Capabilities, Forecaster, ForecastOutput, MaskedInput
from .ingest import parse_timestamp
from .series import HOUR, CovariateSlice

PROTOCOL_VERSION = 1


def _finite_number(v) -> float | None:
    """The value as a finite float, or None if it is not one.

    JSON integers can exceed float64 range; treat those as non-finite
    rather than letting numpy choke on them.
    """
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        return None
    try:
        f = float(v)
    except OverflowError:
        return None
    return f if np.isfinite(f) else None


def _iso(ts) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _jsonable(values) -> list:
    return [None if np.isnan(v) else float(v) for v in np.asarray(values, dtype=np.float64)]


def _from_jsonable(raw, what: str) -> np.ndarray:
    out = np.empty(len(raw))
    for i, v in enumerate(raw):
        if v is None:
            out[i] = np.nan
            continue
        f = _finite_number(v)
        if f is None:
            raise WireProtocolError(f"{what}[{i}] is not a finite number or null: {v!r}")
        out[i] = f
    return out


def encode_request(masked: MaskedInput) -> bytes:
    covs = {}
    for name, cov in masked.covariates.items():
        entry = {"past": _jsonable(cov.past)}
        if cov.future is not None:
            entry["future"] = _jsonable(cov.future)
        covs[name] = entry
    body = {
        "protocol_version": PROTOCOL_VERSION,
        "origin": _iso(masked.origin),
        "target": [
            {"t": _iso(masked.origin + int(o) * HOUR), "v": None if np.isnan(v) else float(v)}
            for o, v in zip(masked.offsets, masked.values)
        ],
        "covariates": covs,
        "horizon": masked.horizon_hours,
        "quantiles": list(masked.quantiles),
    }
    return (json.dumps(body, allow_nan=False) + "\n").encode()


def decode_request(data: bytes | str) -> MaskedInput:
    """Server-side decode; validates protocol version and field shapes."""
    try:
        body = json.loads(data)
    except json.JSONDecodeError as exc:
        raise WireProtocolError(f"request is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise WireProtocolError("request must be a JSON object")
    version = body.get("protocol_version")
    if version != PROTOCOL_VERSION:
        raise WireProtocolError(f"protocol version mismatch: got {version!r}, expected {PROTOCOL_VERSION}")
    for key in ("origin", "target", "horizon"):
        if key not in body:
            raise WireProtocolError(f"request missing {key!r}")
    origin = parse_timestamp(body["origin"])
    offsets, values = [], []
    for i, row in enumerate(body["target"]):
        ts = parse_timestamp(row["t"])
        offsets.append(round((ts - origin).total_seconds() / 3600))
        v = row["v"]
        if v is None:
            values.append(np.nan)
        else:
            f = _finite_number(v)
            if f is None:
                raise WireProtocolError(f"target[{i}].v is not a finite number or null")
            values.append(f)
    covs = {}
    for name, entry in (body.get("covariates") or {}).items():
        past = _from_jsonable(entry.get("past", []), f"covariates[{name}].past")
        future = None
        if "future" in entry:
            future = _from_jsonable(entry["future"], f"covariates[{name}].future")
        covs[name] = CovariateSlice(past=past, future=future)
    return MaskedInput(
        origin=origin,
        offsets=np.asarray(offsets, dtype=np.int64),
        values=np.asarray(values),
        covariates=covs,
        horizon_hours=int(body["horizon"]),
        quantiles=tuple(body.get("quantiles") or (0.5,)),
    )


def encode_response(output: ForecastOutput) -> bytes:
    body = {"median": [float(v) for v in output.median]}
    if output.quantile_values:
        body["quantiles"] = {repr(float(q)): [float(x) for x in v] for q, v in output.quantile_values.items()}
    return (json.dumps(body, allow_nan=False) + "\n").encode()


def encode_error(message: str) -> bytes:
    return (json.dumps({"error": str(message)}) + "\n").encode()


def decode_response(data: bytes | str, horizon_hours: int) -> ForecastOutput:
    try:
        body = json.loads(data)
    except json.JSONDecodeError as exc:
        raise WireProtocolError(f"response is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise WireProtocolError("response must be a JSON object")
    if "error" in body:
        raise ForecasterError(f"remote forecaster error: {body['error']}")
    if "median" not in body:
        raise WireProtocolError("response missing 'median'")
    median = body["median"]
    if not isinstance(median, list) or len(median) != horizon_hours:
        raise WireProtocolError(f"median must be an array of length {horizon_hours}")
    median_values = np.empty(horizon_hours)
    for i, v in enumerate(median):
        f = _finite_number(v)
        if f is None:
            raise WireProtocolError(f"median[{i}] is not a finite number")
        median_values[i] = f
    quantiles = None
    if "quantiles" in body and body["quantiles"] is not None:
        quantiles = {}
        for level, arr in body["quantiles"].items():
            try:
                q = float(level)
            except ValueError as exc:
                raise WireProtocolError(f"bad quantile level {level!r}") from exc
            if not isinstance(arr, list) or len(arr) != horizon_hours:
                raise WireProtocolError(f"quantile {level} must be an array of length {horizon_hours}")
            parsed = np.empty(horizon_hours)
            for i, v in enumerate(arr):
                f = _finite_number(v)
                if f is None:
                    raise WireProtocolError(f"quantile {level}[{i}] is not a finite number")
                parsed[i] = f
            quantiles[q] = parsed
    return ForecastOutput(median=median_values, quantile_values=quantiles)


# Spec op aliases: encode covers requests, decode covers responses.
wire_encode = encode_request
wire_decode = decode_response


def _decode_capabilities(body: dict) -> Capabilities:
    caps = body.get("capabilities")
    if not isinstance(caps, dict):
        raise WireProtocolError("capabilities response missing 'capabilities' object")
    try:
        return Capabilities(
            accepts_missing_target=bool(caps["accepts_missing_target"]),
            accepts_row_drop=bool(caps["accepts_row_drop"]),
            accepts_empty_target=bool(caps.get("accepts_empty_target", False)),
            max_context_hours=int(caps.get("max_context_hours", 8192)),
            deterministic=bool(caps.get("deterministic", False)),
            serial_only=bool(caps.get("serial_only", True)),
        )
    except KeyError as exc:
        raise WireProtocolError(f"capabilities response missing {exc}") from exc


CAPABILITIES_REQUEST = (json.dumps({"protocol_version": PROTOCOL_VERSION, "capabilities": True}) + "\n").encode()


class SubprocessForecaster(Forecaster):
    """Drives an external forecaster over its standard streams.

    One request line in, one response line out. A single pipe cannot
    multiplex, so calls are serialized with a lock regardless of what the
    remote declares.
    """

    wire_bridged = True

    def __init__(self, command, capabilities: Capabilities | None = None, name: str | None = None):
        self.command = command
        self.name = name or f"exec:{command if isinstance(command, str) else ' '.join(command)}"
        self._lock = threading.Lock()
        self._proc: subprocess.Popen | None = None
        self._caps = capabilities

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            cmd = self.command
            self._proc = subprocess.Popen(
                cmd if isinstance(cmd, list) else cmd,
                shell=isinstance(cmd, str),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        return self._proc

    def _roundtrip(self, payload: bytes) -> bytes:
        proc = self._ensure_process()
        try:
            proc.stdin.write(payload)
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ForecasterError(f"{self.name}: subprocess pipe failed: {exc}") from exc
        if not line:
            raise ForecasterError(f"{self.name}: subprocess closed its stream without answering")
        return line

    @property
    def capabilities(self) -> Capabilities:
        if self._caps is None:
            with self._lock:
                if self._caps is None:
                    body = json.loads(self._roundtrip(CAPABILITIES_REQUEST))
                    self._caps = _decode_capabilities(body)
        return self._caps

    def predict(self, masked: MaskedInput) -> ForecastOutput:
        with self._lock:
            line = self._roundtrip(encode_request(masked))
        return decode_response(line, masked.horizon_hours)

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class HttpForecaster(Forecaster):
    """Sends the same request bodies to HTTP POST {url}/forecast."""

    wire_bridged = True

    def __init__(self, url: str, capabilities: Capabilities | None = None, name: str | None = None, timeout: float = 300.0):
        self.url = url.rstrip("/")
        self.name = name or f"http:{url}"
        self.timeout = timeout
        self._caps = capabilities

    def _post(self, path: str, payload: bytes) -> bytes:
        req = urllib.request.Request(
            self.url + path, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read()
        except urllib.error.URLError as exc:
            raise ForecasterError(f"{self.name}: HTTP request failed: {exc}") from exc

    @property
    def capabilities(self) -> Capabilities:
        if self._caps is None:
            body = json.loads(self._post("/capabilities", CAPABILITIES_REQUEST))
            self._caps = _decode_capabilities(body)
        return self._caps

    def predict(self, masked: MaskedInput) -> ForecastOutput:
        return decode_response(self._post("/forecast", encode_request(masked)), masked.horizon_hours)
