"""Command-line front end.

Exit codes: 0 success, 1 domain error (malformed input, infeasible
constraints), 2 internal error, 64 usage error.
"""

from __future__ import annotations

import json
import math
import os
import sys

import click

from . import io as mio
from .entropy import (
    chain_entropy,
    classify_max_entropy,
    enumerate_path_entropy,
    local_entropy,
    residence_times,
)
from .errors import DomainError, FormatError
from .graph import is_bsc_mec, maximal_end_components
from .gridworld import build_gridworld
from .model import Mdp, StationaryPolicy, induce_chain, validate_mdp
from .observer import expected_observations
from .product import structure_report, synthesize_constrained, product
from .rabin import parse_dra
from .simulate import simulate as run_simulation
from .sweep import CSV_COLUMNS, ExperimentSpec, SweepVariable, rows_to_csv, run_sweep
from .synthesis import SynthesisOptions, synthesize_max_entropy

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INTERNAL = 2
EXIT_USAGE = 64


def _fmt(x: float) -> float | str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return x


def _load_mdp(path: str, validate: bool = True) -> Mdp:
    mdp = mio.mdp_from_json(mio.load_json(path))
    if validate:
        report = validate_mdp(mdp)
        if not report.ok:
            raise FormatError(f"{path}: invalid model: " + "; ".join(report.violations))
    return mdp


def _load_policy(path: str, mdp: Mdp) -> StationaryPolicy:
    return mio.policy_from_json(mdp, mio.load_json(path))


def _write(path: str | None, text: str):
    if path is None or path == "-":
        click.echo(text, nl=not text.endswith("\n"))
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _residence_csv(mdp: Mdp, chain) -> str:
    xi = residence_times(chain)
    lines = ["state,xi,local_entropy"]
    for s in range(chain.n_states):
        lines.append(
            f"{chain.states[s]},{xi[s]:.12g},{local_entropy(chain, s):.12g}"
        )
    return "\n".join(lines) + "\n"


@click.group(help="Maximum-entropy policy synthesis for MDPs.")
def cli():
    pass


@cli.command()
@click.argument("mdp_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json-out", "out", default=None, help="Write the verdict to a file instead of stdout.")
def classify(mdp_file, out):
    """Classify the maximum entropy of an MDP as finite/infinite/unbounded."""
    mdp = _load_mdp(mdp_file)
    cls = classify_max_entropy(mdp)
    doc = {"class": cls.tag.value, "witness": None}
    if cls.witness_state is not None:
        doc["witness"] = {"state": mdp.states[cls.witness_state]}
    elif cls.witness_mec is not None:
        dec = maximal_end_components(mdp)
        doc["witness"] = {"mec": sorted(mdp.states[s] for s in dec.mecs[cls.witness_mec][0])}
    _write(out, mio.dumps(doc))


@cli.command()
@click.argument("mdp_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json-out", "out", default=None)
def analyze(mdp_file, out):
    """Emit the maximal end component decomposition as JSON."""
    mdp = _load_mdp(mdp_file)
    dec = maximal_end_components(mdp)
    doc = {
        "mec_of_state": {
            mdp.states[s]: dec.membership[s] for s in range(mdp.n_states)
        },
        "mecs": [
            {
                "index": i,
                "states": sorted(mdp.states[s] for s in states),
                "bottom_strongly_connected": is_bsc_mec(mdp, (states, retained)),
                "retained_actions": {
                    mdp.states[s]: [mdp.actions[s][a] for a in retained[s]]
                    for s in sorted(states)
                },
            }
            for i, (states, retained) in enumerate(dec.mecs)
        ],
    }
    _write(out, mio.dumps(doc))


@cli.command()
@click.argument("mdp_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("policy_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--csv", "csv_out", default=None, help="Residence-time CSV (state, xi, local entropy).")
def entropy(mdp_file, policy_file, csv_out):
    """Entropy of the chain induced by a policy."""
    mdp = _load_mdp(mdp_file)
    policy = _load_policy(policy_file, mdp)
    chain = induce_chain(mdp, policy)
    value = chain_entropy(chain)
    click.echo(mio.dumps({"entropy_bits": _fmt(value)}), nl=False)
    if csv_out:
        _write(csv_out, _residence_csv(mdp, chain))


@cli.command("paths-entropy")
@click.argument("mdp_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("policy_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--cutoff", default=1e-10, show_default=True, help="Stop when un-absorbed mass drops below this.")
@click.option("--node-cap", default=10**7, show_default=True)
def paths_entropy(mdp_file, policy_file, cutoff, node_cap):
    """Entropy of the absorbed-path distribution by direct enumeration."""
    mdp = _load_mdp(mdp_file)
    policy = _load_policy(policy_file, mdp)
    est = enumerate_path_entropy(induce_chain(mdp, policy), cutoff, node_cap)
    click.echo(
        mio.dumps(
            {
                "entropy_bits": est.entropy_bits,
                "residual_mass": est.residual_mass,
                "frontier_entropy_bits": est.frontier_entropy_bits,
                "n_paths": est.n_paths,
            }
        ),
        nl=False,
    )


def _emit_synthesis(mdp, result, policy_out, certificate_out, residence_csv, plot):
    chain = induce_chain(mdp, result.policy)
    _write(policy_out, mio.dumps(mio.policy_to_json(mdp, result.policy)))
    cert = {
        "class": result.entropy_class.tag.value,
        "objective_bits": _fmt(result.objective_bits if result.objective_bits is not None else math.inf),
        "achieved_bits": _fmt(result.achieved_bits),
        "notes": list(result.notes),
    }
    if result.solution is not None:
        cert["solver"] = {
            "status": result.solution.status.value,
            "backend": result.solution.backend,
            "gap": _fmt(result.solution.gap),
            "balance_residual": _fmt(result.solution.max_balance_residual),
            "iterations": result.solution.iterations,
        }
    if certificate_out:
        _write(certificate_out, mio.dumps(cert))
    else:
        click.echo(mio.dumps(cert), nl=False)
    if residence_csv:
        _write(residence_csv, _residence_csv(mdp, chain))
        if plot:
            from .plots import residence_heatmap

            xi = residence_times(chain)
            png = os.path.splitext(residence_csv)[0] + ".png"
            residence_heatmap(chain.states, tuple(xi.xi), png)


@cli.command()
@click.argument("mdp_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--ell", type=float, default=None, help="Entropy floor in bits (feasibility route).")
@click.option("--gamma", type=float, default=None, help="Residence-time cap.")
@click.option("--epsilon", type=float, default=1e-6, show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--backend", default=None, help="Conic backend (clarabel or scs).")
@click.option("--policy-out", default=None)
@click.option("--certificate-out", default=None)
@click.option("--residence-csv", default=None)
@click.option("--plot", is_flag=True, help="Render a residence heatmap next to the CSV (grid models).")
def synthesize(mdp_file, ell, gamma, epsilon, tol, backend, policy_out, certificate_out, residence_csv, plot):
    """Synthesize a maximum-entropy stationary policy."""
    mdp = _load_mdp(mdp_file)
    opts = SynthesisOptions(ell=ell, gamma=gamma, epsilon=epsilon, tol=tol, backend=backend)
    result = synthesize_max_entropy(mdp, opts)
    _emit_synthesis(mdp, result, policy_out, certificate_out, residence_csv, plot)


@cli.command("synthesize-ltl")
@click.argument("mdp_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--dra", "dra_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Task automaton (HOA subset or JSON).")
@click.option("--beta", type=float, required=True, help="Required satisfaction probability.")
@click.option("--ell", type=float, default=None)
@click.option("--gamma", type=float, default=None)
@click.option("--epsilon", type=float, default=1e-6, show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--backend", default=None)
@click.option("--json-out", "out", default=None)
@click.option("--residence-csv", default=None)
@click.option("--plot", is_flag=True)
def synthesize_ltl(mdp_file, dra_file, beta, ell, gamma, epsilon, tol, backend, out, residence_csv, plot):
    """Maximize entropy subject to a Rabin-automaton task constraint."""
    mdp = _load_mdp(mdp_file)
    with open(dra_file, "r", encoding="utf-8") as fh:
        dra = parse_dra(fh.read())
    opts = SynthesisOptions(ell=ell, gamma=gamma, epsilon=epsilon, tol=tol, backend=backend)
    res = synthesize_constrained(mdp, dra, beta, opts)
    pmdp = res.product.mdp
    doc = {
        "class": res.result.entropy_class.tag.value,
        "beta_requested": res.beta_requested,
        "beta_achieved": res.beta_achieved,
        "objective_bits": _fmt(res.result.objective_bits if res.result.objective_bits is not None else math.inf),
        "achieved_bits": _fmt(res.result.achieved_bits),
        "notes": list(res.result.notes),
        "product": {"states": pmdp.n_states, "goal_states": sorted(pmdp.states[s] for s in res.goal)},
        "product_policy": mio.policy_to_json(pmdp, res.result.policy),
        "controller": {
            "memory_update": res.controller.memory_table(),
            "initial_memory": res.product.dra.states[res.controller.initial_memory()],
            "actions": {
                f"{mdp.states[s]}|{res.product.dra.states[q]}": {
                    mdp.actions[s][a]: p
                    for a, p in enumerate(res.controller.action_rows[(s, q)])
                }
                for (s, q) in sorted(res.controller.action_rows)
            },
        },
    }
    _write(out, mio.dumps(doc))
    if residence_csv:
        chain = induce_chain(pmdp, res.result.policy)
        _write(residence_csv, _residence_csv(pmdp, chain))
        if plot:
            from .plots import residence_heatmap

            xi = residence_times(chain)
            png = os.path.splitext(residence_csv)[0] + ".png"
            residence_heatmap(chain.states, tuple(xi.xi), png)


@cli.command("product-report")
@click.argument("mdp_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--dra", "dra_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--no-prune", is_flag=True, help="Keep unreachable product states.")
def product_report(mdp_file, dra_file, no_prune):
    """Structural summary (states, transitions, end components) of a product."""
    mdp = _load_mdp(mdp_file)
    with open(dra_file, "r", encoding="utf-8") as fh:
        dra = parse_dra(fh.read())
    prod = product(mdp, dra, prune=not no_prune)
    click.echo(mio.dumps(structure_report(prod)), nl=False)


@cli.command()
@click.argument("mdp_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("policy_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json-out", "out", default=None)
@click.option("--csv-row", default=None, help="Append a (tag, o_avg, entropy) row to this CSV file.")
@click.option("--tag", default="", help="First column for --csv-row.")
def observe(mdp_file, policy_file, out, csv_row, tag):
    """Predictability report: per-state probe counts and their expected total."""
    mdp = _load_mdp(mdp_file)
    policy = _load_policy(policy_file, mdp)
    chain = induce_chain(mdp, policy)
    report = expected_observations(chain)
    ent = chain_entropy(chain)
    doc = {
        "o_avg": _fmt(report.o_avg),
        "entropy_bits": _fmt(ent),
        "per_state": {
            mdp.states[s]: {"upsilon": report.upsilon[s], "xi": _fmt(report.xi[s])}
            for s in range(mdp.n_states)
        },
    }
    _write(out, mio.dumps(doc))
    if csv_row:
        new = not os.path.exists(csv_row)
        with open(csv_row, "a", encoding="utf-8") as fh:
            if new:
                fh.write("tag,o_avg,entropy_bits\n")
            fh.write(f"{tag},{report.o_avg:.12g},{ent:.12g}\n")


@cli.command()
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", default=None, help="Output MDP JSON path (default stdout).")
def gridworld(spec_file, output):
    """Expand a grid-world spec JSON into an explicit MDP JSON."""
    spec = mio.gridworld_from_json(mio.load_json(spec_file))
    _write(output, mio.dumps(mio.mdp_to_json(build_gridworld(spec))))


@cli.command()
@click.argument("mdp_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("policy_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--runs", default=10_000, show_default=True)
@click.option("--max-steps", default=10_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--keep", default=0, show_default=True, help="Trajectories to retain in the output.")
@click.option("--json-out", "out", default=None)
def simulate(mdp_file, policy_file, runs, max_steps, seed, keep, out):
    """Sample trajectories of the induced chain and report empirical statistics."""
    mdp = _load_mdp(mdp_file)
    policy = _load_policy(policy_file, mdp)
    chain = induce_chain(mdp, policy)
    stats = run_simulation(chain, runs, max_steps, seed, keep_trajectories=keep)
    doc = {
        "rng": stats.rng,
        "seed": stats.seed,
        "n_runs": stats.n_runs,
        "absorbed_fraction": stats.absorbed_fraction,
        "mean_absorption_steps": _fmt(stats.mean_absorption_steps),
        "empirical_path_entropy_bits": stats.empirical_path_entropy_bits,
        "bscc_frequencies": {str(k): v for k, v in stats.bscc_frequencies.items()},
        "distinct_paths": len(stats.path_counts),
        "trajectories": [
            [chain.states[s] for s in path] for path in stats.trajectories
        ],
    }
    _write(out, mio.dumps(doc))


@cli.command()
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", default=None, help="CSV output path (default stdout).")
@click.option("--plot", is_flag=True, help="Render entropy/observation curves next to the CSV.")
def sweep(spec_file, output, plot):
    """Run a parameter sweep described by a sweep spec JSON."""
    doc = mio.load_json(spec_file)
    if doc.get("format") != mio.SWEEP_FORMAT:
        raise FormatError(f"expected format {mio.SWEEP_FORMAT!r}, got {doc.get('format')!r}")
    base = os.path.dirname(os.path.abspath(spec_file))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    mdp = _load_mdp(resolve(doc["mdp"]))
    variable = SweepVariable(doc["variable"])
    dra = None
    tasks: tuple = ()
    if variable is SweepVariable.TASK:
        loaded = []
        for p in doc["grid"]:
            with open(resolve(p), "r", encoding="utf-8") as fh:
                loaded.append((os.path.basename(p), parse_dra(fh.read())))
        tasks = tuple(loaded)
    elif doc.get("dra"):
        with open(resolve(doc["dra"]), "r", encoding="utf-8") as fh:
            dra = parse_dra(fh.read())
    spec = ExperimentSpec(
        mdp=mdp,
        variable=variable,
        grid=tuple(doc.get("grid", ())) if variable is not SweepVariable.TASK else (),
        dra=dra,
        tasks=tasks,
        beta=doc.get("beta"),
        gamma=doc.get("gamma"),
        ell=doc.get("ell"),
        epsilon=doc.get("epsilon", 1e-6),
        tol=doc.get("tol", 1e-8),
        seed=doc.get("seed", 0),
    )
    rows = run_sweep(spec)
    csv_text = rows_to_csv(rows)
    _write(output, csv_text)
    if plot and output:
        from .plots import sweep_curves

        sweep_curves(rows, os.path.splitext(output)[0] + ".png")


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    try:
        cli.main(args=args, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_DOMAIN
    except (DomainError, FileNotFoundError, PermissionError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DOMAIN
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
