"""Command-line driver for the canned experiments.

    swfem balance      --element bdm1 --mesh n=8,16,32 --dt 5e-4 --t-end 1
    swfem conservation --element bdm1 --mesh n=16 --dt 2e-3,1e-3,5e-4
    swfem vortex       --element bdm1 --mesh msh=grid.msh --t-end 56 --apvm
    swfem run          --element rt0  --mesh n=8 --dt 1e-3 --t-end 0.5

Flags override values from an INI-style --config file (sections
experiment/mesh/params/time/output).  Exit status is 0 on success;
failures print a single machine-parseable line `error: <kind>: <detail>`
on stderr and return 1.
"""

import argparse
import sys

from . import experiments, io


def _parse_mesh_spec(text):
    specs = []
    for part in text.split(";"):
        part = part.strip()
        if part.startswith("n="):
            for n in part[2:].split(","):
                specs.append(("structured", int(n)))
        elif part.startswith("msh="):
            for p in part[4:].split(","):
                specs.append(("msh", p))
        else:
            raise ValueError(f"mesh spec must be n=<int,...> or "
                             f"msh=<path,...>, got {part!r}")
    return tuple(specs)


def _parse_dt(text):
    vals = tuple(float(v) for v in text.split(","))
    if any(v <= 0 for v in vals):
        raise ValueError(f"time steps must be positive, got {text}")
    return vals


_DEFAULTS = {
    "balance": dict(meshes=(("structured", 8), ("structured", 16),
                            ("structured", 32)),
                    coriolis=10.0, gravity=10.0, dt=5e-4, t_end=1.0),
    "conservation": dict(meshes=(("structured", 16),), coriolis=5.0,
                         gravity=5.0, dt=2e-3,
                         dt_list=(2e-3, 1e-3, 5e-4, 2.5e-4), t_end=1.001),
    "vortex": dict(meshes=(("structured", 16),), coriolis=5.0,
                   gravity=5.0, dt=2e-3, t_end=56.0, sample_every=50),
    "run": dict(meshes=(("structured", 8),), coriolis=5.0, gravity=5.0,
                dt=1e-3, t_end=1.0),
}

_CONFIG_KEYS = {
    "experiment.element": ("element", str),
    "mesh.structured": ("meshes", lambda v: _parse_mesh_spec(f"n={v}")),
    "mesh.msh": ("meshes", lambda v: _parse_mesh_spec(f"msh={v}")),
    "params.f": ("coriolis", float),
    "params.g": ("gravity", float),
    "params.apvm": ("apvm", lambda v: v.lower() in ("1", "true", "yes",
                                                    "on")),
    "params.tau": ("tau", lambda v: float(v) if v else None),
    "time.dt": ("dt_text", str),
    "time.t_end": ("t_end", float),
    "time.sample_every": ("sample_every", int),
    "output.dir": ("outdir", str),
}


def build_config(command, args):
    values = dict(experiment=command, **_DEFAULTS[command])
    if args.config:
        loaded = io.load_config(args.config)
        for key, raw in loaded.items():
            if key == "experiment.name":
                continue
            if key not in _CONFIG_KEYS:
                raise io.ConfigError(f"unknown config key {key!r}")
            name, conv = _CONFIG_KEYS[key]
            values[name] = conv(raw)
    if args.element:
        values["element"] = args.element
    if args.mesh:
        values["meshes"] = _parse_mesh_spec(args.mesh)
    if args.dt:
        values["dt_text"] = args.dt
    if args.t_end is not None:
        values["t_end"] = float(args.t_end)
    if args.apvm:
        values["apvm"] = True
    if args.tau is not None:
        values["tau"] = float(args.tau)
    if args.out:
        values["outdir"] = args.out

    dt_text = values.pop("dt_text", None)
    if dt_text is not None:
        dts = _parse_dt(dt_text)
        if command == "conservation":
            values["dt_list"] = dts
            values["dt"] = dts[0]
        else:
            if len(dts) != 1:
                raise ValueError(f"{command} takes a single --dt, got "
                                 f"{dt_text!r}")
            values["dt"] = dts[0]
    return experiments.ExperimentConfig(**values)


def make_parser():
    parser = argparse.ArgumentParser(
        prog="swfem",
        description="mixed finite element shallow-water experiments on "
                    "periodic triangular meshes")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("balance", "balanced-state convergence over a mesh sequence"),
            ("conservation", "energy/enstrophy change over a dt sweep"),
            ("vortex", "merging Gaussian vortices with snapshots"),
            ("run", "single free-form integration")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--element", choices=experiments.FAMILIES)
        p.add_argument("--mesh", help="n=<int,...> or msh=<path,...>")
        p.add_argument("--dt", help="time step (comma list for "
                                    "conservation sweeps)")
        p.add_argument("--t-end", dest="t_end", type=float)
        p.add_argument("--apvm", action="store_true",
                       help="enable the anticipated-vorticity "
                            "stabilisation")
        p.add_argument("--tau", type=float,
                       help="stabilisation timescale (default dt/2)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="INI-style config file")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args.command, args)
        if args.command == "balance":
            result = experiments.exp_balance(cfg)
            for row in result["rows"]:
                print(f"{row[0]}: dx={row[1]:.5g} ndof={row[2]} "
                      f"err_u={row[3]:.6e} err_h={row[4]:.6e}")
            if "slope_u_dx" in result:
                print(f"slopes vs dx: u {result['slope_u_dx']:.3f} "
                      f"h {result['slope_h_dx']:.3f}")
                print(f"slopes vs 1/sqrt(ndof): u "
                      f"{result['slope_u_dof']:.3f} "
                      f"h {result['slope_h_dof']:.3f}")
        elif args.command == "conservation":
            result = experiments.exp_conservation(cfg)
            for dt, de, dz in result["rows"]:
                print(f"dt={dt:.6g}: |dE|/E={de:.6e} |dZ|/Z={dz:.6e}")
            print(f"slopes: energy {result['slope_energy']:.3f} "
                  f"enstrophy {result['slope_enstrophy']:.3f}")
        elif args.command == "vortex":
            record = experiments.exp_vortex(cfg)
            z0, z1 = record.enstrophy[0], record.enstrophy[-1]
            e0, e1 = record.energy[0], record.energy[-1]
            print(f"enstrophy {z0:.10g} -> {z1:.10g} "
                  f"(rel change {(z1 - z0) / z0:+.3e})")
            print(f"energy    {e0:.10g} -> {e1:.10g} "
                  f"(rel change {(e1 - e0) / e0:+.3e})")
        else:
            record = experiments.run_custom(cfg)
            print(f"steps={record.steps[-1]} t={record.times[-1]:.6g} "
                  f"energy={record.energy[-1]:.10g}")
        print(f"outputs written to {cfg.outdir}")
        return 0
    except Exception as exc:   # noqa: BLE001 - single CLI error funnel
        kind = type(exc).__name__
        detail = str(exc).replace("\n", " ")
        print(f"error: {kind}: {detail}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
