"""Model backends behind the serve loop.

Each backend maps a request dict ({id, source, hypothesis, optional
context/reference}) to one raw score on the scale the endpoint declares.
A RejectedScore carries a per-request failure back to the caller as an
error response without stopping the loop.

Toy backends (constant, echo, hash) need no model and exist for smoke
tests and protocol debugging. Neural wrappers import their frameworks
lazily so the package works without them installed.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import subprocess

from .gemba import GembaTemplate, extract_gemba_score
from .serve import Scale

COMET_SCALE = Scale(0.0, 1.0, True)
METRICX_SCALE = Scale(0.0, 25.0, False)
DA_SCALE = Scale(0.0, 100.0, True)


class RejectedScore(Exception):
    """The model replied, but no usable score could be produced."""


class ConstantModel:
    default_scale = DA_SCALE

    def __init__(self, value: float):
        self.value = float(value)

    def score(self, request: dict) -> float:
        return self.value


class EchoModel:
    """Hypothesis token count, clipped into the declared range."""

    default_scale = DA_SCALE

    def __init__(self, scale: Scale = DA_SCALE):
        self.scale = scale

    def score(self, request: dict) -> float:
        n = float(len(request["hypothesis"].split()))
        return min(self.scale.max, max(self.scale.min, n))


class HashModel:
    """Deterministic pseudo-uniform score over the declared range."""

    default_scale = DA_SCALE

    def __init__(self, scale: Scale = DA_SCALE):
        self.scale = scale

    def score(self, request: dict) -> float:
        digest = hashlib.sha256(
            request["source"].encode("utf-8") + b"\x1f" + request["hypothesis"].encode("utf-8")
        ).digest()
        u = int.from_bytes(digest[:8], "big") / 2**64
        return self.scale.min + u * (self.scale.max - self.scale.min)


class GembaModel:
    """Prompted-LLM scorer: render prompt, generate, extract the score.

    The generator is an external process speaking line-delimited JSON:
    {"id", "prompt"} in, {"id", "text"} out, one in-flight request at a
    time. Greedy decoding and the generation cap are the generator's
    responsibility; the adapter only builds prompts and post-processes.
    """

    default_scale = DA_SCALE

    def __init__(self, generator_command, template: GembaTemplate):
        command = (
            shlex.split(generator_command)
            if isinstance(generator_command, str)
            else list(generator_command)
        )
        self.template = template
        self.proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
        )

    def close(self):
        if self.proc.poll() is None:
            self.proc.kill()
        self.proc.wait()
        for stream in (self.proc.stdin, self.proc.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass

    def _generate(self, request_id: str, prompt: str) -> str:
        payload = json.dumps({"id": request_id, "prompt": prompt}, ensure_ascii=False)
        try:
            self.proc.stdin.write(payload + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise RejectedScore(f"generator unavailable: {exc}") from exc
        if not line:
            raise RejectedScore("generator closed the stream")
        reply = json.loads(line)
        if reply.get("id") != request_id:
            raise RejectedScore(f"generator answered id {reply.get('id')!r}")
        return reply.get("text", "")

    def score(self, request: dict) -> float:
        text = self._generate(
            request["id"],
            self.template.render(
                request["source"], request["hypothesis"], request.get("context")
            ),
        )
        value = extract_gemba_score(text)
        if value is None:
            raise RejectedScore("no usable score in model reply")
        return value


class CometModel:
    """Wrapper for COMET-family quality estimators (requires unbabel-comet)."""

    default_scale = COMET_SCALE

    def __init__(self, checkpoint: str):
        try:
            from comet import download_model, load_from_checkpoint
        except ImportError as exc:
            raise RuntimeError(
                "COMET support needs the 'unbabel-comet' package installed"
            ) from exc
        self.model = load_from_checkpoint(download_model(checkpoint))

    def score(self, request: dict) -> float:
        data = [{"src": request["source"], "mt": request["hypothesis"]}]
        if request.get("reference") is not None:
            data[0]["ref"] = request["reference"]
        output = self.model.predict(data, batch_size=1, gpus=0, progress_bar=False)
        return float(output.scores[0])


class MetricxModel:
    """Wrapper for MetricX-style error predictors (0 best, 25 worst)."""

    default_scale = METRICX_SCALE

    def __init__(self, checkpoint: str):
        raise RuntimeError(
            "MetricX models run through their own inference script; start it "
            "behind this protocol or use the published runner. Checkpoint "
            f"requested: {checkpoint}"
        )

    def score(self, request: dict) -> float:  # pragma: no cover
        raise NotImplementedError


def build_model(spec: str, generator=None, template: GembaTemplate | None = None):
    """Instantiate a backend from its CLI spec string."""
    if spec.startswith("constant:"):
        return ConstantModel(float(spec.split(":", 1)[1]))
    if spec == "echo":
        return EchoModel()
    if spec == "hash":
        return HashModel()
    if spec == "gemba":
        if not generator:
            raise ValueError("gemba model needs --generator")
        return GembaModel(generator, template or GembaTemplate())
    if spec.startswith("comet:"):
        return CometModel(spec.split(":", 1)[1])
    if spec.startswith("metricx:"):
        return MetricxModel(spec.split(":", 1)[1])
    raise ValueError(f"unknown model spec {spec!r}")
