"""The endpoint side of the scorer wire protocol.

On start the endpoint writes one handshake line declaring its name and
raw scale. It then answers each request line with exactly one response
line carrying the same id: {"id", "score"} on success, {"id", "error"}
on a per-request failure. Malformed request lines get an error response
and the loop continues; end of input ends the session. One model call is
in flight at a time; parallelism is achieved by running more processes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class Scale:
    min: float
    max: float
    higher_is_better: bool

    @classmethod
    def parse(cls, spec: str) -> "Scale":
        parts = spec.split(":")
        if len(parts) != 3 or parts[2] not in ("higher", "lower"):
            raise ValueError(f"bad scale spec {spec!r}, expected e.g. '0:25:lower'")
        return cls(float(parts[0]), float(parts[1]), parts[2] == "higher")


def _emit(stream, obj) -> None:
    stream.write(json.dumps(obj, ensure_ascii=False) + "\n")
    stream.flush()


def serve_scorer(model, scale: Scale, name: str, in_stream, out_stream) -> int:
    """Run the request/response loop until end of input. Returns requests served."""
    from .models import RejectedScore

    _emit(
        out_stream,
        {
            "name": name,
            "scale_min": scale.min,
            "scale_max": scale.max,
            "higher_is_better": scale.higher_is_better,
        },
    )
    served = 0
    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            request_id = request["id"]
            request["source"], request["hypothesis"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            _emit(out_stream, {"id": None, "error": f"malformed request line: {exc}"})
            continue
        try:
            value = model.score(request)
        except RejectedScore as exc:
            _emit(out_stream, {"id": request_id, "error": str(exc)})
            continue
        except Exception as exc:  # model failure must not kill the session
            _emit(out_stream, {"id": request_id, "error": f"model failure: {exc}"})
            continue
        _emit(out_stream, {"id": request_id, "score": value})
        served += 1
    return served
