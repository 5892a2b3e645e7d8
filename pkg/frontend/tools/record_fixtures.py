"""Record wire artifacts from the Python stack for the TypeScript client tests.

Everything the client consumes crosses a real interface: the conformance
vector file, the trusted key set, signed HTTP responses captured from a
live origin+gateway pair (tampered variants included), and the published
worker digest list.  Re-run after any wire-format change:

    python3 frontend/tools/record_fixtures.py
"""

from __future__ import annotations

import base64
import json
import pathlib

from swsig.gateway import GatewayConfig, SigningGateway
from swsig.harness import DEFAULT_RULES
from swsig.httpd import UpstreamClient
from swsig.mitm import AttackConfig, TamperEngine, TamperStrategy
from swsig.origin import DemoOrigin
from swsig.vectors import standard_keys, write_standard_files
from swsig.verifier import build_published_worker_list, worker_digest

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
CLOCK = 1_700_000_000
BUILD_VERSION = 7


def _entry(name: str, path: str, response, *, tampered: bool, strategy: str | None) -> dict:
    return {
        "name": name,
        "path": path,
        "status": response.status,
        "headers": dict(response.headers),
        "body_b64": base64.b64encode(response.body).decode("ascii"),
        "tampered": tampered,
        "strategy": strategy,
        "signed_at": CLOCK,
        "build_version": BUILD_VERSION,
    }


def record_responses() -> list[dict]:
    trusted, _ = standard_keys()
    entries: list[dict] = []
    with DemoOrigin() as origin:
        config = GatewayConfig(
            origin_host=origin.host,
            origin_port=origin.port,
            key=trusted,
            rules=dict(DEFAULT_RULES),
            build_version=BUILD_VERSION,
            clock=lambda: CLOCK,
        )
        with SigningGateway(config) as gateway:
            client = UpstreamClient(gateway.host, gateway.port)
            clean = {
                path: client.request("GET", path)
                for path in ("/index.html", "/style.css", "/api/data", "/sw.js")
            }
            client.close()

    for path, response in clean.items():
        entries.append(_entry(f"clean {path}", path, response, tampered=False, strategy=None))

    plans = [
        (TamperStrategy.BODY_MUTATION, "/index.html"),
        (TamperStrategy.BODY_MUTATION, "/api/data"),
        (TamperStrategy.ENVELOPE_STRIP, "/api/data"),
        (TamperStrategy.ENVELOPE_STRIP, "/style.css"),
        (TamperStrategy.WORKER_SWAP, "/sw.js"),
    ]
    for strategy, path in plans:
        engine = TamperEngine(AttackConfig(interception_rate=1.0, strategy=strategy, seed=99))
        delivered, record = engine.apply(f"fixture-{strategy.value}", path, clean[path])
        assert record.tampered, f"{strategy.value} on {path} must modify the response"
        entries.append(
            _entry(f"{strategy.value} {path}", path, delivered, tampered=True, strategy=strategy.value)
        )
    return entries


def record_worker_update(sw_entries: list[dict]) -> dict:
    active = base64.b64decode(
        next(e for e in sw_entries if e["name"] == "clean /sw.js")["body_b64"]
    )
    next_version = active + b"\n// release 2\n"
    swapped = base64.b64decode(
        next(e for e in sw_entries if e["name"] == "worker_swap /sw.js")["body_b64"]
    )
    assert swapped != active
    published = build_published_worker_list([active, next_version])
    return {
        "active_b64": base64.b64encode(active).decode("ascii"),
        "next_version_b64": base64.b64encode(next_version).decode("ascii"),
        "swapped_b64": base64.b64encode(swapped).decode("ascii"),
        "published_list_b64": base64.b64encode(published).decode("ascii"),
        "active_digest": worker_digest(active),
    }


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    count = write_standard_files(
        str(FIXTURES / "vectors.jsonl"), str(FIXTURES / "keys.json")
    )
    entries = record_responses()
    (FIXTURES / "responses.json").write_text(
        json.dumps({"clock": CLOCK, "entries": entries}, indent=2, sort_keys=True) + "\n"
    )
    (FIXTURES / "worker-update.json").write_text(
        json.dumps(record_worker_update(entries), indent=2, sort_keys=True) + "\n"
    )
    print(f"{count} vectors, {len(entries)} recorded responses -> {FIXTURES}")


if __name__ == "__main__":
    main()
