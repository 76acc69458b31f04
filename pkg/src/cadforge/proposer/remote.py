"""HTTP client for an external program generator.

POST {endpoint}/propose with the shape and decoding parameters, parse
each returned text, drop whatever fails to parse or validate (real
generators emit broken code; the loop has to shrug). POST {endpoint}/train
ships pairs as newline-delimited JSON and ignores every failure: training
the far side is best-effort.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np
import requests

from ..dsl import Program, count_tokens, parse, print_program
from ..errors import CadforgeError, ProtocolError, TransportError
from ..geometry.pointcloud import PointCloud
from .base import Proposer
from .params import DecodingParams

DEFAULT_TIMEOUT = 30.0


class RemoteProposal(NamedTuple):
    programs: list[Program]
    dropped: int


def _shape_points(shape) -> list[list[float]]:
    pts = shape.points if isinstance(shape, PointCloud) else np.asarray(shape, dtype=np.float64)
    return [[float(x), float(y), float(z)] for x, y, z in pts]


def remote_propose(
    endpoint: str,
    shape,
    k: int,
    params: DecodingParams,
    seed: int,
    timeout: float = DEFAULT_TIMEOUT,
) -> RemoteProposal:
    body = {
        "points": _shape_points(shape),
        "k": int(k),
        "temperature": params.temperature,
        "top_p": params.top_p,
        "top_k": params.top_k,
        "max_tokens": params.max_tokens,
        "seed": int(seed),
    }
    try:
        resp = requests.post(endpoint.rstrip("/") + "/propose", json=body, timeout=timeout)
        resp.raise_for_status()
    except requests.RequestException as exc:
        raise TransportError(f"propose request failed: {exc}") from exc
    try:
        payload = resp.json()
    except ValueError as exc:
        raise ProtocolError("response is not JSON") from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("programs"), list):
        raise ProtocolError('response must be an object with a "programs" list')

    programs: list[Program] = []
    dropped = 0
    for text in payload["programs"]:
        if not isinstance(text, str):
            dropped += 1
            continue
        try:
            program = parse(text)
        except CadforgeError:
            dropped += 1
            continue
        if count_tokens(program) > params.max_tokens:
            dropped += 1
            continue
        programs.append(program)
    return RemoteProposal(programs, dropped)


class RemoteProposer(Proposer):
    def __init__(self, endpoint: str, max_in_flight: int = 4, timeout: float = DEFAULT_TIMEOUT):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be positive")
        self.endpoint = endpoint
        self.max_in_flight = max_in_flight
        self.timeout = timeout
        self.dropped_total = 0

    def propose(self, shape, k, params, seed):
        result = remote_propose(self.endpoint, shape, k, params, seed, timeout=self.timeout)
        self.dropped_total += result.dropped
        return result.programs

    def propose_batch(self, shapes, k, params, seeds):
        shapes = list(shapes)
        seeds = list(seeds)
        if len(shapes) != len(seeds):
            raise ValueError("one seed per shape required")
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            futures = [
                pool.submit(remote_propose, self.endpoint, s, k, params, sd, self.timeout)
                for s, sd in zip(shapes, seeds)
            ]
            results = [f.result() for f in futures]
        self.dropped_total += sum(r.dropped for r in results)
        return [r.programs for r in results]

    def update(self, pairs):
        lines = []
        for pair in pairs:
            source = getattr(pair.source, "value", str(pair.source))
            cd = pair.cd_to_target
            lines.append(json.dumps({
                "shape": getattr(pair, "shape_path", ""),
                "program": print_program(pair.program),
                "cd": None if cd is None else float(cd),
                "source": source,
                "iteration": int(pair.iteration),
            }))
        if not lines:
            return
        try:
            requests.post(
                self.endpoint.rstrip("/") + "/train",
                data="\n".join(lines).encode() + b"\n",
                headers={"Content-Type": "application/x-ndjson"},
                timeout=self.timeout,
            )
        except requests.RequestException:
            pass  # fire-and-forget: the loop must survive a deaf trainer
