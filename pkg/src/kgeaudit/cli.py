"""Command-line interface.

Exit codes: 0 success, 1 bad spec/config/input, 2 runtime failure. Click's
own usage errors are remapped to 1 so every "you asked for something invalid"
path looks the same to callers.
"""

from __future__ import annotations

import logging
import sys

import click

from . import experiment, kernels
from .errors import KgeAuditError, TrainingDivergedError

# invalid invocations are spec errors, not runtime failures
click.exceptions.UsageError.exit_code = 1

logger = logging.getLogger(__name__)


def _run(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except TrainingDivergedError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except KgeAuditError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:  # noqa: BLE001 - boundary: report and signal failure
        click.echo(f"unexpected failure: {exc!r}", err=True)
        sys.exit(2)


def _load(spec_path):
    return _run(experiment.load_spec, spec_path)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Multiplicity audits for knowledge-graph link prediction."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


_spec_argument = click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
_output_option = click.option("-o", "--output-dir", default=None,
                              help="Overrides the spec's output_dir.")


@main.command()
@_spec_argument
@_output_option
def train(spec_path, output_dir):
    """Train the spec's baseline model and report its metrics."""
    spec = _load(spec_path)
    payload = _run(experiment.run_train, spec, output_dir)
    hits = payload["hits"]
    click.echo(f"backend={payload['backend']} checkpoint={payload['checkpoint_hash'][:12]}")
    click.echo(f"hits valid={hits['valid']} test={hits['test']}")


@main.command()
@_spec_argument
@_output_option
def audit(spec_path, output_dir):
    """Build a level set and quantify multiplicity, with and without voting."""
    spec = _load(spec_path)
    payload = _run(experiment.run_audit, spec, output_dir)
    for name in ("none", "majority", "borda", "range"):
        block = payload["reports"].get(name)
        if block:
            click.echo(
                f"{name}: ambiguity={block['ambiguity']:.4f} "
                f"discrepancy={block['discrepancy']:.4f} mean_hits={block['mean_hits']:.4f}"
            )


@main.command("sweep-eps")
@_spec_argument
@_output_option
def sweep_eps(spec_path, output_dir):
    """Threshold one competitor pool at each epsilon in the spec."""
    spec = _load(spec_path)
    rows = _run(experiment.run_sweep_eps, spec, output_dir)
    click.echo(f"wrote {len(rows)} sweep rows")


@main.command("sweep-agg")
@_spec_argument
@_output_option
def sweep_agg(spec_path, output_dir):
    """Vary the number of aggregated rankings per competitor."""
    spec = _load(spec_path)
    rows = _run(experiment.run_sweep_agg, spec, output_dir)
    click.echo(f"wrote {len(rows)} sweep rows")


@main.command()
@click.option("--profiles", "profiles_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Ballot CSV: query_id, voter_id, entity_id, raw_score, position.")
@click.option("--rule", required=True, help="majority, borda, or range.")
@click.option("-o", "--output", "out_path", required=True, type=click.Path(dir_okay=False))
def aggregate(profiles_path, rule, out_path):
    """Aggregate externally produced ballots with a voting rule."""
    n = _run(experiment.run_aggregate_profiles, profiles_path, rule, out_path)
    click.echo(f"aggregated {n} profiles -> {out_path}")


@main.command()
@_spec_argument
@click.argument("audit_dir", type=click.Path(exists=True, file_okay=False))
@_output_option
def correlate(spec_path, audit_dir, output_dir):
    """Correlate per-group multiplicity with train-set frequency."""
    spec = _load(spec_path)
    payload = _run(experiment.run_correlate, spec, audit_dir, output_dir)
    for key, value in sorted(payload["correlations"].items()):
        if value is None:
            click.echo(f"{key}: degenerate")
        else:
            click.echo(f"{key}: rho={value['rho']:.4f} p={value['p_value']:.4g}")


@main.command()
@click.argument("audit_dir", type=click.Path(exists=True, file_okay=False))
def report(audit_dir):
    """Rebuild and print the human summary of a finished audit."""
    click.echo(_run(experiment.run_report, audit_dir), nl=False)


if __name__ == "__main__":
    main()
