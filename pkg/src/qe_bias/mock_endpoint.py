"""Runnable wire-protocol endpoint backed by the built-in mock scorers.

Reference implementation of the scorer and translator protocols, used by
the protocol tests and handy as a template for real adapter processes:

    python -m qe_bias.mock_endpoint --scorer hash --shuffle --seed 7
    python -m qe_bias.mock_endpoint --kind translator --translator upper

The endpoint reads request lines until end of input, then answers each
one. With --shuffle the responses are emitted in a random order, which
exercises the client's id matching. Fault flags (--drop-id, --duplicate-id,
--emit-unknown-id, --garble-id) simulate broken endpoints.
"""

import argparse
import json
import random
import sys

from .scoring import BiasedScorer, ConstantScorer, HashScorer


def _build_scorer(spec: str):
    if spec == "hash":
        return HashScorer()
    if spec.startswith("constant:"):
        return ConstantScorer(float(spec.split(":", 1)[1]))
    if spec.startswith("biased:"):
        _, base, penalty, markers = spec.split(":")
        return BiasedScorer(float(base), float(penalty), markers.split(","))
    raise SystemExit(f"unknown scorer {spec!r}")


def _emit(obj):
    sys.stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
    sys.stdout.flush()


def _serve_scorer(args):
    scorer = _build_scorer(args.scorer)
    scale = scorer.declared_scale
    _emit(
        {
            "name": scorer.name,
            "scale_min": scale.min,
            "scale_max": scale.max,
            "higher_is_better": scale.higher_is_better,
        }
    )
    requests = []
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        requests.append(json.loads(line))
    responses = []
    for req in requests:
        rid = req["id"]
        if args.drop_id and rid == args.drop_id:
            continue
        value = scorer.score_pair(req["source"], req["hypothesis"])
        responses.append({"id": rid, "score": value})
        if args.duplicate_id and rid == args.duplicate_id:
            responses.append({"id": rid, "score": value})
    if args.emit_unknown_id:
        responses.insert(0, {"id": "__unsolicited__", "score": 0.5})
    if args.shuffle:
        random.Random(args.seed).shuffle(responses)
    for resp in responses:
        _emit(resp)


def _serve_translator(args):
    behaviors = {
        "identity": lambda t: t,
        "upper": lambda t: t.upper(),
        "reverse": lambda t: t[::-1],
    }
    fn = behaviors[args.translator]
    responses = []
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        if args.drop_id and req["id"] == args.drop_id:
            continue
        responses.append({"id": req["id"], "translation": fn(req["text"])})
    if args.shuffle:
        random.Random(args.seed).shuffle(responses)
    for resp in responses:
        _emit(resp)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", choices=("scorer", "translator"), default="scorer")
    parser.add_argument("--scorer", default="hash", help="hash | constant:V | biased:B:P:w1,w2")
    parser.add_argument("--translator", default="identity", choices=("identity", "upper", "reverse"))
    parser.add_argument("--shuffle", action="store_true", help="emit responses out of order")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--drop-id", default=None, help="never respond to this id")
    parser.add_argument("--duplicate-id", default=None, help="respond twice to this id")
    parser.add_argument("--emit-unknown-id", action="store_true")
    args = parser.parse_args(argv)
    if args.kind == "scorer":
        _serve_scorer(args)
    else:
        _serve_translator(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
