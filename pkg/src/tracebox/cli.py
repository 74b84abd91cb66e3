"""Operator entry points: record, verify, curate, ask, simulate, serve, prove.

Every command is a thin composition of library calls and shares one exit
code scheme: 0 success, 1 negative verification, 2 configuration error,
3 I/O or format error, 4 ledger failure with digests pending. All commands
accept --format text|json; options can also come from TRACEBOX_* env vars.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import explain, verifier, workload_sim
from .curation import curate_records, render_timeline
from .errors import ConfigError, FormatError, LedgerError, TraceboxError
from .hashchain import Digest
from .ledger import Ledger, create_account
from .policy import SamplingPolicy
from .recorder import LedgerBinding, open_bag, read_bag, read_stream
from .workload_sim import REFERENCE_RATES, REFERENCE_TOPICS

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_LEDGER = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_policy(spec: str) -> SamplingPolicy:
    if spec == "none":
        return SamplingPolicy.none()
    if spec == "adaptive":
        return SamplingPolicy.rate_adaptive(REFERENCE_RATES)
    if spec.startswith("adaptive:"):
        rates_path = Path(spec.split(":", 1)[1])
        rates = json.loads(rates_path.read_text(encoding="utf-8"))
        return SamplingPolicy.rate_adaptive(rates)
    if spec.startswith("fixed:"):
        try:
            return SamplingPolicy.fixed(int(spec.split(":", 1)[1]))
        except ValueError as exc:
            raise ConfigError(f"bad fixed interval in {spec!r}") from exc
    raise ConfigError(f"policy must be fixed:N, adaptive[:rates.json], or none; got {spec!r}")


def _parse_seed(seed_hex: str | None) -> bytes | None:
    if seed_hex is None:
        return None
    try:
        seed = bytes.fromhex(seed_hex)
    except ValueError as exc:
        raise ConfigError(f"seed must be hex: {exc}") from exc
    if len(seed) != 32:
        raise ConfigError(f"seed must be 64 hex chars (32 bytes), got {len(seed)} bytes")
    return seed


def _open_ledger(path: Path, capacity: int | None = None) -> Ledger:
    kwargs = {"tx_capacity": capacity} if capacity else {}
    if path.is_file():
        return Ledger.load(path, **kwargs)
    return Ledger(persist_path=path, **kwargs)


@click.group(context_settings={"auto_envvar_prefix": "TRACEBOX"})
def main() -> None:
    """Tamper-evident message recording, verification, and explanation."""


@main.command()
@click.option("--in", "input_path", required=True, help="Stream file of record lines, or - for stdin.")
@click.option("--out", "output_path", required=True, type=click.Path(), help="Bag file to write.")
@click.option("--policy", "policy_spec", required=True, help="fixed:N | adaptive[:rates.json] | none")
@click.option("--seed", "seed_hex", default=None, help="Chain seed as 64 hex chars (random if omitted).")
@click.option("--ledger", "ledger_path", default=None, type=click.Path(), help="Ledger persistence file.")
@click.option("--batch-limit", default=32, show_default=True, help="Max digests per transaction.")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text")
def record(input_path, output_path, policy_spec, seed_hex, ledger_path, batch_limit, output_format):
    """Record a message stream into a bag, submitting proofs when bound."""
    try:
        policy = _parse_policy(policy_spec)
        seed = _parse_seed(seed_hex)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        _fail(EXIT_CONFIG, str(exc))

    binding = None
    contract_id = None
    if ledger_path is not None:
        try:
            ledger = _open_ledger(Path(ledger_path))
            account = create_account()
            contract_id = ledger.deploy_contract(account)
            binding = LedgerBinding(ledger=ledger, contract_id=contract_id, account=account)
        except (TraceboxError, OSError) as exc:
            _fail(EXIT_LEDGER, f"cannot open ledger: {exc}")

    pending_after_stop: list[str] = []
    try:
        if input_path == "-":
            records = read_stream("/dev/stdin")
        else:
            records = read_stream(input_path)
        writer = open_bag(output_path, policy, seed=seed, ledger_binding=binding,
                          batch_limit=batch_limit)
        for message in records:
            writer.ingest(message)
        try:
            footer = writer.stop()
        except LedgerError:
            footer = writer.footer
            pending_after_stop = [d.hex() for d in writer.pending_digests]
    except FormatError as exc:
        _fail(EXIT_IO, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))

    doc = {
        "bag": str(output_path),
        "contract": contract_id,
        "final_digest": footer.final_digest,
        "record_count": footer.record_count,
        "selected_count": footer.selected_count,
        "tx_count": footer.tx_count,
        "pending_digests": pending_after_stop,
    }
    if output_format == "json":
        click.echo(json.dumps(doc))
    else:
        click.echo(f"recorded {footer.record_count} records to {output_path}")
        click.echo(f"selected {footer.selected_count} for proofs; {footer.tx_count} transactions")
        if contract_id:
            click.echo(f"contract {contract_id}")
        click.echo(f"final digest {footer.final_digest}")
        for digest in pending_after_stop:
            click.echo(f"pending {digest}")
    if pending_after_stop:
        _fail(EXIT_LEDGER, f"{len(pending_after_stop)} digests were not submitted")


@main.command()
@click.option("--bag", "bag_path", required=True, type=click.Path())
@click.option("--ledger", "ledger_path", required=True, type=click.Path())
@click.option("--contract", "contract_id", default=None, help="Override the manifest's contract id.")
@click.option("--head-only", is_flag=True, help="Check only the chain head against the ledger.")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text")
def verify(bag_path, ledger_path, contract_id, head_only, output_format):
    """Recompute a bag's chain and check every digest against the ledger."""
    if not Path(ledger_path).is_file():
        _fail(EXIT_CONFIG, f"ledger file not found: {ledger_path}")
    try:
        ledger = Ledger.load(ledger_path)
        report = verifier.verify_bag(bag_path, ledger, contract_id=contract_id,
                                     head_only=head_only)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except FormatError as exc:
        _fail(EXIT_IO, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))

    if output_format == "json":
        click.echo(json.dumps(report.to_dict()))
    else:
        status = "ok" if report.ok else "TAMPERED OR INCOMPLETE"
        click.echo(f"verification: {status}")
        click.echo(f"confirmed {report.confirmed}/{report.checked} digests on ledger")
        click.echo(f"final digest match: {report.final_digest_match}")
        if report.first_missing_index is not None:
            click.echo(f"first missing chain index: {report.first_missing_index}")
    sys.exit(EXIT_OK if report.ok else EXIT_VERIFICATION_FAILED)


@main.command()
@click.option("--bag", "bag_path", required=True, type=click.Path())
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text")
def curate(bag_path, output_path, output_format):
    """Write the curated timeline for a bag."""
    try:
        bag = read_bag(bag_path)
        result = curate_records(bag.records)
        timeline = render_timeline(result.events)
        Path(output_path).write_text(timeline, encoding="utf-8")
    except FormatError as exc:
        _fail(EXIT_IO, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    doc = {"out": str(output_path), "events": len(result.events), "skipped": len(result.skipped)}
    click.echo(json.dumps(doc) if output_format == "json" else
               f"wrote {doc['events']} events to {output_path} ({doc['skipped']} skipped)")


@main.command()
@click.option("--bag", "bag_path", required=True, type=click.Path())
@click.option("--question", required=True)
@click.option("--k", default=explain.DEFAULT_TOP_K, show_default=True)
@click.option("--answerer", default="extractive", show_default=True,
              help="'extractive' or an HTTP completion endpoint URL.")
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text")
def ask(bag_path, question, k, answerer, output_format):
    """Answer a question about a recorded run from its curated timeline."""
    if not question.strip():
        _fail(EXIT_CONFIG, "question must be non-empty")
    try:
        bag = read_bag(bag_path)
        timeline = render_timeline(curate_records(bag.records).events)
        store = explain.build_index(timeline)
        result = explain.answer(question, store, answerer=answerer, k=k)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except FormatError as exc:
        _fail(EXIT_IO, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    except explain.AnswererUnavailable as exc:
        _fail(EXIT_LEDGER, str(exc))
    if output_format == "json":
        click.echo(json.dumps({
            "text": result.text,
            "sources": [[chunk_id, score] for chunk_id, score in result.sources],
            "prompt": result.prompt,
        }))
    else:
        click.echo(result.text)
        for chunk_id, score in result.sources:
            click.echo(f"source chunk {chunk_id} (score {score:.3f})")


@main.command()
@click.option("--policies", default="10,25,50,100,adaptive,none", show_default=True)
@click.option("--duration", default=30.0, show_default=True, help="Simulated seconds.")
@click.option("--seed", default=7, show_default=True)
@click.option("--out", "output_path", required=True, type=click.Path())
@click.option("--svg", "svg_path", default=None, type=click.Path())
@click.option("--queue-capacity", default=workload_sim.DEFAULT_QUEUE_CAPACITY, show_default=True)
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text")
def simulate(policies, duration, seed, output_path, svg_path, queue_capacity, output_format):
    """Compare message loss across proof policies on the reference workload."""
    policy_map = {}
    try:
        for token in policies.split(","):
            token = token.strip()
            if token == "adaptive":
                policy_map["rate-adaptive"] = SamplingPolicy.rate_adaptive(REFERENCE_RATES)
            elif token == "none":
                policy_map["none"] = SamplingPolicy.none()
            else:
                policy_map[f"interval-{int(token)}"] = SamplingPolicy.fixed(int(token))
    except (ValueError, ConfigError) as exc:
        _fail(EXIT_CONFIG, f"bad policy list {policies!r}: {exc}")
    try:
        reports = workload_sim.compare_policies(
            REFERENCE_TOPICS, policy_map, duration_s=duration, seed=seed,
            queue_capacity=queue_capacity,
        )
        table = workload_sim.format_table(reports)
        Path(output_path).write_text(table, encoding="utf-8")
        if svg_path is not None:
            Path(svg_path).write_text(workload_sim.render_svg(reports), encoding="utf-8")
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    if output_format == "json":
        click.echo(json.dumps([report.to_dict() for report in reports]))
    else:
        click.echo(table, nl=False)
        click.echo(f"table written to {output_path}")
        if svg_path:
            click.echo(f"chart written to {svg_path}")


@main.command()
@click.option("--records", "records_dir", required=True, type=click.Path())
@click.option("--ledger", "ledger_path", default=None, type=click.Path())
@click.option("--bind", default="127.0.0.1:8787", show_default=True)
@click.option("--answerer", default="extractive", show_default=True)
@click.option("--cors-origin", "cors_origins", multiple=True, default=("*",), show_default=True)
def serve(records_dir, ledger_path, bind, answerer, cors_origins):
    """Serve the auditor API over HTTP."""
    import uvicorn

    from .service import ServiceConfig, create_app

    try:
        host, port_text = bind.rsplit(":", 1)
        port = int(port_text)
    except ValueError:
        _fail(EXIT_CONFIG, f"bind must be host:port, got {bind!r}")
    config = ServiceConfig(
        records_dir=Path(records_dir),
        ledger_path=Path(ledger_path) if ledger_path else None,
        answerer=answerer,
        cors_origins=list(cors_origins),
    )
    uvicorn.run(create_app(config), host=host, port=port)


@main.command()
@click.option("--digest", "digest_hex", required=True, help="64 lowercase hex chars.")
@click.option("--ledger", "ledger_path", required=True, type=click.Path())
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text")
def prove(digest_hex, ledger_path, output_format):
    """Look up one digest's proof on the ledger."""
    if len(digest_hex) != 64 or any(c not in "0123456789abcdef" for c in digest_hex):
        _fail(EXIT_CONFIG, "digest must be 64 lowercase hex chars")
    if not Path(ledger_path).is_file():
        _fail(EXIT_CONFIG, f"ledger file not found: {ledger_path}")
    try:
        ledger = Ledger.load(ledger_path)
    except (TraceboxError, OSError) as exc:
        _fail(EXIT_IO, str(exc))
    digest = Digest.from_hex(digest_hex)
    block_number = 0
    for contract_id in sorted(ledger.contracts):
        block_number = ledger.query_proof(contract_id, digest)
        if block_number:
            break
    message = (
        verifier.STORED_MESSAGE.format(block_number=block_number)
        if block_number
        else verifier.NOT_STORED_MESSAGE
    )
    if output_format == "json":
        click.echo(json.dumps({"block_number": block_number, "message": message}))
    else:
        click.echo(message)


if __name__ == "__main__":
    main()
