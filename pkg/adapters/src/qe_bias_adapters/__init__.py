"""Scorer endpoints speaking the qe-bias line protocol.

The harness talks to scorers over line-delimited JSON: a handshake line
declaring the raw scale, then one response per request id. This package
provides the endpoint side: toy models for smoke testing, wrappers for
neural quality metrics, and a prompted-LLM scorer with direct-assessment
prompt rendering and score extraction. Adapters declare their raw scale
and never rescale; normalization belongs to the harness.
"""

__version__ = "0.1.0"

from .gemba import GembaTemplate, extract_gemba_score
from .serve import Scale, serve_scorer
